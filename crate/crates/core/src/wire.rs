//! Canonical binary serialization of a whole IR (`.bir` files).
//!
//! ```text
//! file       := "BIR\0" format_version:u8=1 ir
//! ir         := uuid version:u32 seq<module> cfg aux_data
//! module     := uuid name:str isa:u8 file_format:u8 opt<u64> seq<section>
//!               seq<symbol> seq<proxy> aux_data
//! section    := uuid name:str set<flag:u8> seq<interval>
//! interval   := uuid opt<u64 address> size:u64 contents:bytes
//!               seq<offset:u64 block> map<offset:u64, symexpr>
//! block      := 0:u8 uuid size:u64      (code)
//!             | 1:u8 uuid size:u64      (data)
//! proxy      := uuid
//! symbol     := uuid name:str payload
//! payload    := 0:u8 i64 | 1:u8 uuid | 2:u8
//! symexpr    := 0:u8 uuid i64                 (SymAddrConst)
//!             | 1:u8 uuid uuid scale:i64 i64  (SymAddrAddr)
//! cfg        := set<uuid> count:u64 (source:uuid target:uuid label:u8)*
//! aux_data   := map<label:str, (type_spec:str, payload:bytes)>
//! ```
//!
//! Integers are fixed-width little-endian. `str` and `bytes` are a u64
//! length followed by the raw bytes, `opt<T>` is a presence byte (0/1) and
//! then `T`, `seq<T>` is a u64 count then elements in stored order.
//! `set` and `map` are a u64 count then elements (or entries) sorted by
//! their encoded (key) bytes; edges are sorted by (source, target, label).
//! Loading accepts unsorted sets and maps so that [`canonicalize`] can
//! repair files from sloppy producers.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::auxdata::{AuxDataEntry, AuxDataTables, TypeSpec};
use crate::cfg::{Cfg, CfgError, EdgeLabel};
use crate::codec::{put_bytes, put_sorted, put_str, put_u64, put_uuid, ReadError, Reader};
use crate::ir::{Ir, NodeKind};
use crate::model::{
    Block, BlockEntry, ByteInterval, CodeBlock, DataBlock, FileFormat, Isa, Module, ProxyBlock, Section,
    SectionFlag, Symbol, SymbolPayload, SymbolicExpression,
};
use crate::uuid::Uuid;
use crate::validate::{validate, Violation};

pub const MAGIC: [u8; 4] = *b"BIR\0";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("Truncated({position})")]
    Truncated { position: usize },
    #[error("invalid UTF-8 at byte {position}")]
    InvalidUtf8 { position: usize },
    #[error("invalid {what} tag {tag} at byte {position}")]
    InvalidTag { what: &'static str, tag: u8, position: usize },
    #[error("duplicate set element or map key at byte {position}")]
    DuplicateKey { position: usize },
    #[error("malformed CFG edge at byte {position}: {error}")]
    MalformedCfg { position: usize, error: CfgError },
    #[error("{count} trailing bytes at {position}")]
    TrailingBytes { position: usize, count: usize },
    #[error("DuplicateUuid({0})")]
    DuplicateUuid(Uuid),
    #[error("DanglingReference({0})")]
    DanglingReference(Uuid),
    #[error("MalformedTypeSpec({0:?})")]
    MalformedTypeSpec(String),
    #[error("IR has {} violation(s); first: {}", .0.len(), .0[0])]
    InvalidIr(Vec<Violation>),
}

impl From<ReadError> for WireError {
    fn from(e: ReadError) -> Self {
        match e {
            ReadError::Truncated { position } => WireError::Truncated { position },
            ReadError::InvalidUtf8 { position } => WireError::InvalidUtf8 { position },
        }
    }
}

/// Serializes a valid IR. Fails with [`WireError::InvalidIr`] when
/// [`validate`] reports anything.
pub fn save(ir: &Ir) -> Result<Vec<u8>, WireError> {
    let violations = validate(ir);
    if !violations.is_empty() {
        return Err(WireError::InvalidIr(violations));
    }
    Ok(save_unchecked(ir))
}

/// Serializes any IR, valid or not.
pub fn save_unchecked(ir: &Ir) -> Vec<u8> {
    let mut out = Vec::with_capacity(256);
    out.extend_from_slice(&MAGIC);
    out.push(FORMAT_VERSION);
    put_uuid(&mut out, &ir.uuid());
    out.extend_from_slice(&ir.version().to_le_bytes());
    put_u64(&mut out, ir.modules().len() as u64);
    for m in ir.modules() {
        put_module(&mut out, m);
    }
    put_cfg(&mut out, ir.cfg());
    put_aux(&mut out, ir.aux_data());
    out
}

fn put_opt_u64(out: &mut Vec<u8>, v: Option<u64>) {
    match v {
        Some(v) => {
            out.push(1);
            put_u64(out, v);
        }
        None => out.push(0),
    }
}

fn put_module(out: &mut Vec<u8>, m: &Module) {
    put_uuid(out, &m.uuid);
    put_str(out, &m.name);
    out.push(m.isa.ordinal());
    out.push(m.file_format.ordinal());
    put_opt_u64(out, m.preferred_base);
    put_u64(out, m.sections.len() as u64);
    for s in &m.sections {
        put_section(out, s);
    }
    put_u64(out, m.symbols.len() as u64);
    for s in &m.symbols {
        put_symbol(out, s);
    }
    put_u64(out, m.proxy_blocks.len() as u64);
    for p in &m.proxy_blocks {
        put_uuid(out, &p.uuid);
    }
    put_aux(out, &m.aux_data);
}

fn put_section(out: &mut Vec<u8>, s: &Section) {
    put_uuid(out, &s.uuid);
    put_str(out, &s.name);
    put_sorted(out, s.flags.iter().map(|f| vec![f.ordinal()]).collect());
    put_u64(out, s.intervals.len() as u64);
    for bi in &s.intervals {
        put_interval(out, bi);
    }
}

fn put_interval(out: &mut Vec<u8>, bi: &ByteInterval) {
    put_uuid(out, &bi.uuid);
    put_opt_u64(out, bi.address);
    put_u64(out, bi.size);
    put_bytes(out, &bi.contents);
    put_u64(out, bi.blocks.len() as u64);
    for e in &bi.blocks {
        put_u64(out, e.offset);
        let (tag, uuid, size) = match e.block {
            Block::Code(b) => (0u8, b.uuid, b.size),
            Block::Data(b) => (1u8, b.uuid, b.size),
        };
        out.push(tag);
        put_uuid(out, &uuid);
        put_u64(out, size);
    }
    let entries = bi
        .sym_exprs
        .iter()
        .map(|(off, expr)| {
            let mut item = off.to_le_bytes().to_vec();
            put_sym_expr(&mut item, expr);
            item
        })
        .collect();
    // u64 keys are prefix-free, so sorting whole entries sorts by key bytes
    put_sorted(out, entries);
}

fn put_sym_expr(out: &mut Vec<u8>, expr: &SymbolicExpression) {
    match *expr {
        SymbolicExpression::SymAddrConst { symbol, offset } => {
            out.push(0);
            put_uuid(out, &symbol);
            out.extend_from_slice(&offset.to_le_bytes());
        }
        SymbolicExpression::SymAddrAddr { minuend, subtrahend, scale, offset } => {
            out.push(1);
            put_uuid(out, &minuend);
            put_uuid(out, &subtrahend);
            out.extend_from_slice(&scale.to_le_bytes());
            out.extend_from_slice(&offset.to_le_bytes());
        }
    }
}

fn put_symbol(out: &mut Vec<u8>, s: &Symbol) {
    put_uuid(out, &s.uuid);
    put_str(out, &s.name);
    match s.payload {
        SymbolPayload::Value(v) => {
            out.push(0);
            out.extend_from_slice(&v.to_le_bytes());
        }
        SymbolPayload::Referent(r) => {
            out.push(1);
            put_uuid(out, &r);
        }
        SymbolPayload::Undefined => out.push(2),
    }
}

fn put_cfg(out: &mut Vec<u8>, cfg: &Cfg) {
    put_u64(out, cfg.vertices().len() as u64);
    for v in cfg.vertices() {
        put_uuid(out, v);
    }
    put_u64(out, cfg.edge_count() as u64);
    for e in cfg.edges() {
        put_uuid(out, &e.source);
        put_uuid(out, &e.target);
        out.push(e.label.code());
    }
}

fn put_aux(out: &mut Vec<u8>, tables: &AuxDataTables) {
    let entries = tables
        .iter()
        .map(|(label, entry)| {
            let mut item = Vec::new();
            put_str(&mut item, label);
            put_str(&mut item, &entry.type_spec);
            put_bytes(&mut item, &entry.bytes);
            item
        })
        .collect();
    put_sorted(out, entries);
}

/// Loads a file and checks that UUIDs are unique and every reference
/// (symbol referents, symbolic-expression symbols, CFG nodes) resolves.
pub fn load(bytes: &[u8]) -> Result<Ir, WireError> {
    let ir = load_unchecked(bytes)?;
    check_references(&ir)?;
    Ok(ir)
}

/// Loads a file with only format-level checks. Duplicate UUIDs and
/// dangling references are left for [`validate`] to report.
pub fn load_unchecked(bytes: &[u8]) -> Result<Ir, WireError> {
    let mut r = Reader::new(bytes);
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(WireError::UnsupportedVersion(version));
    }
    let uuid = r.uuid()?;
    let ir_version = r.u32()?;
    let (n, cap) = r.count()?;
    let mut modules = Vec::with_capacity(cap);
    for _ in 0..n {
        modules.push(get_module(&mut r)?);
    }
    let cfg = get_cfg(&mut r)?;
    let aux = get_aux(&mut r)?;
    if !r.is_empty() {
        return Err(WireError::TrailingBytes { position: r.position(), count: r.remaining() });
    }
    Ok(Ir::from_parts(uuid, ir_version, modules, cfg, aux))
}

/// `save(load(bytes))` without the validity requirements: any file that
/// parses is rewritten in canonical form.
pub fn canonicalize(bytes: &[u8]) -> Result<Vec<u8>, WireError> {
    Ok(save_unchecked(&load_unchecked(bytes)?))
}

fn check_references(ir: &Ir) -> Result<(), WireError> {
    let mut seen = HashSet::new();
    for (id, _) in ir.all_uuids() {
        if !seen.insert(id) {
            return Err(WireError::DuplicateUuid(id));
        }
    }
    let resolves = |id: Uuid| if seen.contains(&id) { Ok(()) } else { Err(WireError::DanglingReference(id)) };
    for m in ir.modules() {
        for s in &m.symbols {
            if let SymbolPayload::Referent(r) = s.payload {
                resolves(r)?;
            }
        }
        for bi in m.intervals() {
            for expr in bi.sym_exprs.values() {
                for s in expr.symbols() {
                    resolves(s)?;
                }
            }
        }
    }
    for &v in ir.cfg().vertices() {
        resolves(v)?;
    }
    debug_assert!(ir.cfg().edges().all(|e| ir.cfg().vertices().contains(&e.source)));
    let _ = NodeKind::Ir;
    Ok(())
}

fn tag<T>(r: &mut Reader<'_>, what: &'static str, f: impl Fn(u8) -> Option<T>) -> Result<T, WireError> {
    let position = r.position();
    let t = r.u8()?;
    f(t).ok_or(WireError::InvalidTag { what, tag: t, position })
}

fn get_opt_u64(r: &mut Reader<'_>) -> Result<Option<u64>, WireError> {
    match tag(r, "option", |t| (t <= 1).then_some(t))? {
        0 => Ok(None),
        _ => Ok(Some(r.u64()?)),
    }
}

fn get_module(r: &mut Reader<'_>) -> Result<Module, WireError> {
    let uuid = r.uuid()?;
    let name = r.string()?;
    let mut m = Module::with_uuid(uuid, name);
    m.isa = tag(r, "isa", Isa::from_ordinal)?;
    m.file_format = tag(r, "file format", FileFormat::from_ordinal)?;
    m.preferred_base = get_opt_u64(r)?;
    let (n, cap) = r.count()?;
    m.sections.reserve(cap);
    for _ in 0..n {
        m.sections.push(get_section(r)?);
    }
    let (n, cap) = r.count()?;
    m.symbols.reserve(cap);
    for _ in 0..n {
        m.symbols.push(get_symbol(r)?);
    }
    let (n, cap) = r.count()?;
    m.proxy_blocks.reserve(cap);
    for _ in 0..n {
        m.proxy_blocks.push(ProxyBlock { uuid: r.uuid()? });
    }
    m.aux_data = get_aux(r)?;
    Ok(m)
}

fn get_section(r: &mut Reader<'_>) -> Result<Section, WireError> {
    let uuid = r.uuid()?;
    let name = r.string()?;
    let mut s = Section::with_uuid(uuid, name);
    let (n, _) = r.count()?;
    for _ in 0..n {
        let position = r.position();
        let flag = tag(r, "section flag", SectionFlag::from_ordinal)?;
        if !s.flags.insert(flag) {
            return Err(WireError::DuplicateKey { position });
        }
    }
    let (n, cap) = r.count()?;
    s.intervals.reserve(cap);
    for _ in 0..n {
        s.intervals.push(get_interval(r)?);
    }
    Ok(s)
}

fn get_interval(r: &mut Reader<'_>) -> Result<ByteInterval, WireError> {
    let uuid = r.uuid()?;
    let mut bi = ByteInterval::with_uuid(uuid, 0);
    bi.address = get_opt_u64(r)?;
    bi.size = r.u64()?;
    bi.contents = r.bytes()?.to_vec();
    let (n, cap) = r.count()?;
    bi.blocks.reserve(cap);
    for _ in 0..n {
        let offset = r.u64()?;
        let kind = tag(r, "block", |t| (t <= 1).then_some(t))?;
        let uuid = r.uuid()?;
        let size = r.u64()?;
        let block = if kind == 0 { Block::Code(CodeBlock { uuid, size }) } else { Block::Data(DataBlock { uuid, size }) };
        bi.blocks.push(BlockEntry { offset, block });
    }
    let (n, _) = r.count()?;
    for _ in 0..n {
        let position = r.position();
        let off = r.u64()?;
        let expr = get_sym_expr(r)?;
        if bi.sym_exprs.insert(off, expr).is_some() {
            return Err(WireError::DuplicateKey { position });
        }
    }
    Ok(bi)
}

fn get_sym_expr(r: &mut Reader<'_>) -> Result<SymbolicExpression, WireError> {
    Ok(match tag(r, "symbolic expression", |t| (t <= 1).then_some(t))? {
        0 => SymbolicExpression::SymAddrConst { symbol: r.uuid()?, offset: r.i64()? },
        _ => SymbolicExpression::SymAddrAddr {
            minuend: r.uuid()?,
            subtrahend: r.uuid()?,
            scale: r.i64()?,
            offset: r.i64()?,
        },
    })
}

fn get_symbol(r: &mut Reader<'_>) -> Result<Symbol, WireError> {
    let uuid = r.uuid()?;
    let name = r.string()?;
    let payload = match tag(r, "symbol payload", |t| (t <= 2).then_some(t))? {
        0 => SymbolPayload::Value(r.i64()?),
        1 => SymbolPayload::Referent(r.uuid()?),
        _ => SymbolPayload::Undefined,
    };
    Ok(Symbol { uuid, name, payload })
}

fn get_cfg(r: &mut Reader<'_>) -> Result<Cfg, WireError> {
    let mut cfg = Cfg::new();
    let (n, _) = r.count()?;
    let mut vertices = BTreeSet::new();
    for _ in 0..n {
        let position = r.position();
        if !vertices.insert(r.uuid()?) {
            return Err(WireError::DuplicateKey { position });
        }
    }
    for v in vertices {
        cfg.add_vertex(v);
    }
    let (n, _) = r.count()?;
    for _ in 0..n {
        let position = r.position();
        let source = r.uuid()?;
        let target = r.uuid()?;
        let label = EdgeLabel::from_code(r.u8()?).map_err(|error| WireError::MalformedCfg { position, error })?;
        cfg.add_edge(source, target, label)
            .map_err(|error| WireError::MalformedCfg { position, error })?;
    }
    Ok(cfg)
}

fn get_aux(r: &mut Reader<'_>) -> Result<AuxDataTables, WireError> {
    let (n, _) = r.count()?;
    let mut entries = BTreeMap::new();
    for _ in 0..n {
        let position = r.position();
        let label = r.string()?;
        let type_spec = r.string()?;
        let bytes = r.bytes()?.to_vec();
        if TypeSpec::parse(&type_spec).is_err() {
            return Err(WireError::MalformedTypeSpec(label));
        }
        if entries.insert(label, AuxDataEntry { type_spec, bytes }).is_some() {
            return Err(WireError::DuplicateKey { position });
        }
    }
    let mut tables = AuxDataTables::new();
    for (label, entry) in entries {
        tables.insert_raw(label, entry);
    }
    Ok(tables)
}
