//! Whole-IR structural validation.
//!
//! Validation never fails: defects come back as [`Violation`] values so
//! half-built IRs from lifters can be inspected and repaired.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::auxdata::{
    self, decode_value, sanctioned_spec, AuxDataTables, Strictness, TypeSpec, Value, FUNCTION_BLOCKS,
    FUNCTION_ENTRIES,
};
use crate::ir::{Ir, NodeKind};
use crate::model::{Module, SymbolPayload, SymbolicExpression};
use crate::uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationCode {
    DuplicateUuid,
    DanglingReference,
    BlockOutOfRange,
    ContentsExceedSize,
    SymExprOutOfRange,
    CfgEndpointNotCodeOrProxy,
    AuxDataDecodeFailure,
    FunctionTableInconsistent,
    ScaleZero,
}

impl ViolationCode {
    pub const ALL: [ViolationCode; 9] = [
        ViolationCode::DuplicateUuid,
        ViolationCode::DanglingReference,
        ViolationCode::BlockOutOfRange,
        ViolationCode::ContentsExceedSize,
        ViolationCode::SymExprOutOfRange,
        ViolationCode::CfgEndpointNotCodeOrProxy,
        ViolationCode::AuxDataDecodeFailure,
        ViolationCode::FunctionTableInconsistent,
        ViolationCode::ScaleZero,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ViolationCode::DuplicateUuid => "DuplicateUuid",
            ViolationCode::DanglingReference => "DanglingReference",
            ViolationCode::BlockOutOfRange => "BlockOutOfRange",
            ViolationCode::ContentsExceedSize => "ContentsExceedSize",
            ViolationCode::SymExprOutOfRange => "SymExprOutOfRange",
            ViolationCode::CfgEndpointNotCodeOrProxy => "CfgEndpointNotCodeOrProxy",
            ViolationCode::AuxDataDecodeFailure => "AuxDataDecodeFailure",
            ViolationCode::FunctionTableInconsistent => "FunctionTableInconsistent",
            ViolationCode::ScaleZero => "ScaleZero",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViolationLocation {
    pub uuid: Uuid,
    pub offset: Option<u64>,
}

impl fmt::Display for ViolationLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.offset {
            Some(off) => write!(f, "{}+{off:#x}", self.uuid),
            None => write!(f, "{}", self.uuid),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Violation {
    pub code: ViolationCode,
    pub location: ViolationLocation,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.code, self.location, self.message)
    }
}

struct Checker<'a> {
    ir: &'a Ir,
    kinds: HashMap<Uuid, NodeKind>,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn report(&mut self, code: ViolationCode, uuid: Uuid, offset: Option<u64>, message: impl Into<String>) {
        self.out.push(Violation { code, location: ViolationLocation { uuid, offset }, message: message.into() });
    }

    fn kind(&self, id: Uuid) -> Option<NodeKind> {
        self.kinds.get(&id).copied()
    }
}

/// Checks every structural invariant of the IR. An empty result means the
/// IR is well formed. The output order is deterministic.
pub fn validate(ir: &Ir) -> Vec<Violation> {
    let mut counts: BTreeMap<Uuid, usize> = BTreeMap::new();
    let mut kinds = HashMap::new();
    for (id, kind) in ir.all_uuids() {
        *counts.entry(id).or_default() += 1;
        kinds.entry(id).or_insert(kind);
    }
    let mut c = Checker { ir, kinds, out: Vec::new() };

    for (id, n) in counts {
        if n > 1 {
            c.report(ViolationCode::DuplicateUuid, id, None, format!("uuid used by {n} entities"));
        }
    }

    for module in ir.modules() {
        check_module(&mut c, module);
    }
    check_cfg(&mut c);
    check_aux(&mut c, ir.uuid(), ir.aux_data());
    c.out
}

fn check_module(c: &mut Checker<'_>, module: &Module) {
    for bi in module.intervals() {
        if bi.contents.len() as u64 > bi.size {
            c.report(
                ViolationCode::ContentsExceedSize,
                bi.uuid,
                None,
                format!("{} content bytes in interval of size {}", bi.contents.len(), bi.size),
            );
        }
        for e in &bi.blocks {
            if e.end().map_or(true, |end| end > bi.size) {
                c.report(
                    ViolationCode::BlockOutOfRange,
                    e.block.uuid(),
                    Some(e.offset),
                    format!("block of size {} at offset {} exceeds interval size {}", e.block.size(), e.offset, bi.size),
                );
            }
        }
        for (&off, expr) in &bi.sym_exprs {
            if off >= bi.size {
                c.report(
                    ViolationCode::SymExprOutOfRange,
                    bi.uuid,
                    Some(off),
                    format!("symbolic expression at offset {off} in interval of size {}", bi.size),
                );
            }
            for s in expr.symbols() {
                if c.kind(s) != Some(NodeKind::Symbol) {
                    c.report(ViolationCode::DanglingReference, bi.uuid, Some(off), format!("symbol {s} does not resolve"));
                }
            }
            if let SymbolicExpression::SymAddrAddr { scale: 0, .. } = expr {
                c.report(ViolationCode::ScaleZero, bi.uuid, Some(off), "SymAddrAddr with scale 0");
            }
        }
    }
    for sym in &module.symbols {
        if let SymbolPayload::Referent(r) = sym.payload {
            if !c.kind(r).is_some_and(NodeKind::is_block) {
                c.report(
                    ViolationCode::DanglingReference,
                    sym.uuid,
                    None,
                    format!("symbol {:?} referent {r} is not a block", sym.name),
                );
            }
        }
    }
    check_aux(c, module.uuid, &module.aux_data);
}

fn check_cfg(c: &mut Checker<'_>) {
    let cfg = c.ir.cfg();
    let mut bad = BTreeSet::new();
    for &v in cfg.vertices() {
        if !c.kind(v).is_some_and(NodeKind::is_cfg_node) {
            bad.insert(v);
        }
    }
    for e in cfg.edges() {
        for end in [e.source, e.target] {
            if !c.kind(end).is_some_and(NodeKind::is_cfg_node) {
                bad.insert(end);
            }
        }
    }
    for v in bad {
        let what = match c.kind(v) {
            Some(k) => format!("CFG node {v} is a {}", k.name()),
            None => format!("CFG node {v} does not resolve"),
        };
        c.report(ViolationCode::CfgEndpointNotCodeOrProxy, v, None, what);
    }
}

/// Where entity references sit inside each sanctioned table.
enum RefSlots {
    /// mapping<_, set<UUID>>: set members
    SetValues,
    /// mapping<_, UUID>: values
    UuidValues,
    /// mapping<UUID, _>: keys
    UuidKeys,
    /// mapping<UUID, UUID>: keys and values
    UuidKeysAndValues,
    /// mapping<Offset, _>: key elements
    OffsetKeys,
}

fn ref_slots(label: &str) -> Option<RefSlots> {
    Some(match label {
        auxdata::FUNCTION_BLOCKS | auxdata::FUNCTION_ENTRIES => RefSlots::SetValues,
        auxdata::FUNCTION_NAMES => RefSlots::UuidValues,
        auxdata::TYPES | auxdata::ALIGNMENT => RefSlots::UuidKeys,
        auxdata::SYMBOL_FORWARDING => RefSlots::UuidKeysAndValues,
        auxdata::COMMENTS | auxdata::PADDING => RefSlots::OffsetKeys,
        _ => return None,
    })
}

fn check_aux(c: &mut Checker<'_>, owner: Uuid, tables: &AuxDataTables) {
    let mut decoded: BTreeMap<&str, Value> = BTreeMap::new();
    for (label, entry) in tables.iter() {
        let stored = match TypeSpec::parse(&entry.type_spec) {
            Ok(spec) => spec,
            Err(e) => {
                c.report(ViolationCode::AuxDataDecodeFailure, owner, None, format!("table {label:?}: {e}"));
                continue;
            }
        };
        let Some(spec) = sanctioned_spec(label) else { continue };
        if stored != spec {
            c.report(
                ViolationCode::AuxDataDecodeFailure,
                owner,
                None,
                format!("table {label:?} has type {stored}, expected {spec}"),
            );
            continue;
        }
        match decode_value(&spec, &entry.bytes, Strictness::Strict) {
            Ok(v) => {
                decoded.insert(label.as_str(), v);
            }
            Err(e) => c.report(ViolationCode::AuxDataDecodeFailure, owner, None, format!("table {label:?}: {e}")),
        }
    }

    for (label, value) in &decoded {
        check_table_refs(c, owner, label, value);
    }
    check_function_tables(c, owner, decoded.get(FUNCTION_BLOCKS), decoded.get(FUNCTION_ENTRIES));
}

fn check_table_refs(c: &mut Checker<'_>, owner: Uuid, label: &str, value: &Value) {
    let (Some(slots), Value::Mapping(entries)) = (ref_slots(label), value) else { return };
    let mut refs: Vec<(Uuid, Option<u64>)> = Vec::new();
    for (k, v) in entries {
        match (&slots, k, v) {
            (RefSlots::SetValues, _, Value::Set(items)) => {
                refs.extend(items.iter().filter_map(|i| match i {
                    Value::Uuid(u) => Some((*u, None)),
                    _ => None,
                }));
            }
            (RefSlots::UuidValues, _, Value::Uuid(u)) => refs.push((*u, None)),
            (RefSlots::UuidKeys, Value::Uuid(u), _) => refs.push((*u, None)),
            (RefSlots::UuidKeysAndValues, Value::Uuid(a), Value::Uuid(b)) => {
                refs.push((*a, None));
                refs.push((*b, None));
            }
            (RefSlots::OffsetKeys, Value::Offset(o), _) => refs.push((o.element, Some(o.displacement))),
            _ => {}
        }
    }
    for (id, displacement) in refs {
        if c.kind(id).is_none() {
            c.report(ViolationCode::DanglingReference, owner, None, format!("table {label:?} references unknown {id}"));
            continue;
        }
        if let Some(d) = displacement {
            if let Some(size) = element_size(c.ir, id) {
                if d > size {
                    c.report(
                        ViolationCode::BlockOutOfRange,
                        id,
                        Some(d),
                        format!("table {label:?} offset {d} beyond element size {size}"),
                    );
                }
            }
        }
    }
}

fn element_size(ir: &Ir, id: Uuid) -> Option<u64> {
    if let Some(e) = ir.block_entry(id) {
        return Some(e.block.size());
    }
    ir.interval(id).map(|bi| bi.size)
}

fn check_function_tables(c: &mut Checker<'_>, owner: Uuid, blocks: Option<&Value>, entries: Option<&Value>) {
    let Some(Value::Mapping(entries)) = entries else { return };
    let empty = BTreeMap::new();
    let blocks = match blocks {
        Some(Value::Mapping(b)) => b,
        _ => &empty,
    };
    for (func, ents) in entries {
        let Value::Uuid(fid) = func else { continue };
        match (blocks.get(func), ents) {
            (None, _) => c.report(
                ViolationCode::FunctionTableInconsistent,
                owner,
                None,
                format!("function {fid} has entries but no functionBlocks record"),
            ),
            (Some(Value::Set(bs)), Value::Set(es)) => {
                for e in es.difference(bs) {
                    if let Value::Uuid(e) = e {
                        c.report(
                            ViolationCode::FunctionTableInconsistent,
                            owner,
                            None,
                            format!("entry {e} of function {fid} is not among its blocks"),
                        );
                    }
                }
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::auxdata::{make_function, AuxDataEntry, ALIGNMENT};
    use crate::cfg::{EdgeKind, EdgeLabel};
    use crate::model::{ByteInterval, Module, ProxyBlock, Section, Symbol};

    struct Two {
        ir: Ir,
        m1: Uuid,
        i1: Uuid,
        code: Uuid,
        data: Uuid,
        sym: Uuid,
    }

    fn two_modules() -> Two {
        let mut ir = Ir::new(1);
        let m1 = ir.add_module(Module::new("a")).unwrap();
        let m2 = ir.add_module(Module::new("b")).unwrap();
        let s1 = ir.add_section(m1, Section::new(".text")).unwrap();
        let i1 = ir.add_interval(s1, ByteInterval::from_contents(vec![0x90; 16])).unwrap();
        let code = ir.add_code_block(i1, 0, 8).unwrap();
        let data = ir.add_data_block(i1, 8, 8).unwrap();
        let p = ir.add_proxy_block(m2, ProxyBlock::new()).unwrap();
        let sym = ir.add_symbol(m1, Symbol::new("main", SymbolPayload::Referent(code))).unwrap();
        ir.add_symbol(m2, Symbol::new("ext", SymbolPayload::Referent(p))).unwrap();
        ir.set_sym_expr(i1, 10, SymbolicExpression::SymAddrConst { symbol: sym, offset: 0 }).unwrap();
        ir.add_edge(code, p, EdgeLabel::new(false, true, EdgeKind::Call)).unwrap();
        Two { ir, m1, i1, code, data, sym }
    }

    fn codes(v: &[Violation]) -> Vec<ViolationCode> {
        v.iter().map(|v| v.code).collect()
    }

    #[test]
    fn empty_and_well_formed() {
        assert!(validate(&Ir::new(1)).is_empty());
        assert_eq!(validate(&two_modules().ir), vec![]);
    }

    #[test]
    fn dangling_symbol() {
        let mut t = two_modules();
        t.ir.modules_mut()[0].symbols[0].payload = SymbolPayload::Referent(Uuid::new());
        assert_eq!(codes(&validate(&t.ir)), vec![ViolationCode::DanglingReference]);
    }

    #[test]
    fn overlap_is_not_a_violation() {
        let mut t = two_modules();
        t.ir.add_code_block(t.i1, 4, 8).unwrap();
        assert!(validate(&t.ir).is_empty());
    }

    #[test]
    fn range_and_scale_defects() {
        let mut t = two_modules();
        {
            let bi = t.ir.interval_mut(t.i1).unwrap();
            bi.contents.resize(17, 0);
            bi.blocks[1].offset = 9;
            bi.sym_exprs.insert(16, SymbolicExpression::SymAddrConst { symbol: t.sym, offset: 0 });
            bi.sym_exprs.insert(
                12,
                SymbolicExpression::SymAddrAddr { minuend: t.sym, subtrahend: t.sym, scale: 0, offset: 0 },
            );
        }
        let got: BTreeSet<_> = codes(&validate(&t.ir)).into_iter().collect();
        assert_eq!(
            got,
            BTreeSet::from([
                ViolationCode::ContentsExceedSize,
                ViolationCode::BlockOutOfRange,
                ViolationCode::SymExprOutOfRange,
                ViolationCode::ScaleZero,
            ])
        );
    }

    #[test]
    fn duplicate_and_cfg_typing() {
        let mut t = two_modules();
        t.ir.cfg_mut().add_edge(t.code, t.data, EdgeLabel::new(false, true, EdgeKind::Branch)).unwrap();
        assert_eq!(codes(&validate(&t.ir)), vec![ViolationCode::CfgEndpointNotCodeOrProxy]);
        let mut t = two_modules();
        t.ir.modules_mut()[0].symbols[0].uuid = t.data;
        assert_eq!(codes(&validate(&t.ir)), vec![ViolationCode::DuplicateUuid, ViolationCode::DanglingReference]);
    }

    #[test]
    fn aux_decode_failure() {
        let mut t = two_modules();
        t.ir.module_aux_data_mut(t.m1)
            .unwrap()
            .insert_raw(ALIGNMENT, AuxDataEntry { type_spec: "mapping<UUID,uint64>".into(), bytes: vec![1, 2, 3] });
        assert_eq!(codes(&validate(&t.ir)), vec![ViolationCode::AuxDataDecodeFailure]);
        // Unknown labels are opaque.
        let mut t = two_modules();
        t.ir.aux_data_mut().insert_raw("opaque", AuxDataEntry { type_spec: "uint64".into(), bytes: vec![1] });
        assert!(validate(&t.ir).is_empty());
    }

    #[test]
    fn function_entries_outside_blocks() {
        let mut t = two_modules();
        let f = make_function(&mut t.ir, t.m1, [t.code].into(), [t.code].into(), t.sym).unwrap();
        assert!(validate(&t.ir).is_empty());

        // Oracle: compare the two tables by hand.
        let tables = &t.ir.module(t.m1).unwrap().aux_data;
        let mut fe: BTreeMap<Uuid, BTreeSet<Uuid>> = tables.get(FUNCTION_ENTRIES).unwrap().unwrap();
        let other = t.ir.add_code_block(t.i1, 0, 2).unwrap();
        fe.get_mut(&f).unwrap().insert(other);
        t.ir.module_aux_data_mut(t.m1).unwrap().set(FUNCTION_ENTRIES, &fe).unwrap();
        let fb: BTreeMap<Uuid, BTreeSet<Uuid>> =
            t.ir.module(t.m1).unwrap().aux_data.get(FUNCTION_BLOCKS).unwrap().unwrap();
        let oracle_inconsistent = fe.iter().any(|(k, es)| fb.get(k).map_or(true, |bs| !es.is_subset(bs)));
        assert!(oracle_inconsistent);
        assert_eq!(codes(&validate(&t.ir)), vec![ViolationCode::FunctionTableInconsistent]);
    }

    #[test]
    fn idempotent() {
        let mut t = two_modules();
        t.ir.modules_mut()[0].symbols[0].payload = SymbolPayload::Referent(Uuid::new());
        t.ir.cfg_mut().add_edge(t.code, t.data, EdgeLabel::new(false, false, EdgeKind::Branch)).unwrap();
        assert_eq!(validate(&t.ir), validate(&t.ir));
    }
}
