//! Structural equality written against the public data model field by
//! field, without the model's own `PartialEq` on compound types or the
//! wire format.

use std::collections::BTreeSet;

use bir_core::{AuxDataTables, Block, ByteInterval, Ir, Module, Section, SymbolPayload, SymbolicExpression, Uuid};

/// `Ok` when the IRs are structurally equal, else the path of the first
/// difference.
pub fn structurally_equal(a: &Ir, b: &Ir) -> Result<(), String> {
    same("ir.uuid", a.uuid().as_bytes(), b.uuid().as_bytes())?;
    same("ir.version", &a.version(), &b.version())?;
    same("ir.modules.len", &a.modules().len(), &b.modules().len())?;
    for (i, (x, y)) in a.modules().iter().zip(b.modules()).enumerate() {
        module(&format!("module[{i}]"), x, y)?;
    }
    let va: BTreeSet<[u8; 16]> = a.cfg().vertices().iter().map(|u| *u.as_bytes()).collect();
    let vb: BTreeSet<[u8; 16]> = b.cfg().vertices().iter().map(|u| *u.as_bytes()).collect();
    same("cfg.vertices", &va, &vb)?;
    let edges = |ir: &Ir| -> BTreeSet<([u8; 16], [u8; 16], bool, bool, u8)> {
        ir.cfg()
            .edges()
            .map(|e| (*e.source.as_bytes(), *e.target.as_bytes(), e.label.conditional, e.label.direct, e.label.kind.ordinal()))
            .collect()
    };
    same("cfg.edges", &edges(a), &edges(b))?;
    aux("ir.aux", a.aux_data(), b.aux_data())
}

fn same<T: PartialEq + std::fmt::Debug + ?Sized>(path: &str, a: &T, b: &T) -> Result<(), String> {
    if a == b {
        Ok(())
    } else {
        Err(format!("{path}: {a:?} != {b:?}"))
    }
}

fn id(u: &Uuid) -> [u8; 16] {
    *u.as_bytes()
}

fn module(p: &str, a: &Module, b: &Module) -> Result<(), String> {
    same(&format!("{p}.uuid"), &id(&a.uuid), &id(&b.uuid))?;
    same(&format!("{p}.name"), a.name.as_bytes(), b.name.as_bytes())?;
    same(&format!("{p}.isa"), &a.isa.ordinal(), &b.isa.ordinal())?;
    same(&format!("{p}.file_format"), &a.file_format.ordinal(), &b.file_format.ordinal())?;
    same(&format!("{p}.preferred_base"), &a.preferred_base, &b.preferred_base)?;
    same(&format!("{p}.sections.len"), &a.sections.len(), &b.sections.len())?;
    for (i, (x, y)) in a.sections.iter().zip(&b.sections).enumerate() {
        section(&format!("{p}.section[{i}]"), x, y)?;
    }
    same(&format!("{p}.symbols.len"), &a.symbols.len(), &b.symbols.len())?;
    for (i, (x, y)) in a.symbols.iter().zip(&b.symbols).enumerate() {
        let q = format!("{p}.symbol[{i}]");
        same(&format!("{q}.uuid"), &id(&x.uuid), &id(&y.uuid))?;
        same(&format!("{q}.name"), x.name.as_bytes(), y.name.as_bytes())?;
        same(&format!("{q}.payload"), &payload(&x.payload), &payload(&y.payload))?;
    }
    let pa: Vec<_> = a.proxy_blocks.iter().map(|p| id(&p.uuid)).collect();
    let pb: Vec<_> = b.proxy_blocks.iter().map(|p| id(&p.uuid)).collect();
    same(&format!("{p}.proxies"), &pa, &pb)?;
    aux(&format!("{p}.aux"), &a.aux_data, &b.aux_data)
}

fn payload(p: &SymbolPayload) -> (u8, i64, [u8; 16]) {
    match p {
        SymbolPayload::Value(v) => (0, *v, [0; 16]),
        SymbolPayload::Referent(r) => (1, 0, id(r)),
        SymbolPayload::Undefined => (2, 0, [0; 16]),
    }
}

fn section(p: &str, a: &Section, b: &Section) -> Result<(), String> {
    same(&format!("{p}.uuid"), &id(&a.uuid), &id(&b.uuid))?;
    same(&format!("{p}.name"), a.name.as_bytes(), b.name.as_bytes())?;
    let fa: Vec<u8> = a.flags.iter().map(|f| f.ordinal()).collect();
    let fb: Vec<u8> = b.flags.iter().map(|f| f.ordinal()).collect();
    same(&format!("{p}.flags"), &fa, &fb)?;
    same(&format!("{p}.intervals.len"), &a.intervals.len(), &b.intervals.len())?;
    for (i, (x, y)) in a.intervals.iter().zip(&b.intervals).enumerate() {
        interval(&format!("{p}.interval[{i}]"), x, y)?;
    }
    Ok(())
}

fn block(b: &Block) -> (bool, [u8; 16], u64) {
    match b {
        Block::Code(c) => (true, id(&c.uuid), c.size),
        Block::Data(d) => (false, id(&d.uuid), d.size),
    }
}

fn expr(e: &SymbolicExpression) -> (u8, [u8; 16], [u8; 16], i64, i64) {
    match *e {
        SymbolicExpression::SymAddrConst { symbol, offset } => (0, id(&symbol), [0; 16], 0, offset),
        SymbolicExpression::SymAddrAddr { minuend, subtrahend, scale, offset } => {
            (1, id(&minuend), id(&subtrahend), scale, offset)
        }
    }
}

fn interval(p: &str, a: &ByteInterval, b: &ByteInterval) -> Result<(), String> {
    same(&format!("{p}.uuid"), &id(&a.uuid), &id(&b.uuid))?;
    same(&format!("{p}.address"), &a.address, &b.address)?;
    same(&format!("{p}.size"), &a.size, &b.size)?;
    same(&format!("{p}.contents"), a.contents.as_slice(), b.contents.as_slice())?;
    let ba: Vec<_> = a.blocks.iter().map(|e| (e.offset, block(&e.block))).collect();
    let bb: Vec<_> = b.blocks.iter().map(|e| (e.offset, block(&e.block))).collect();
    same(&format!("{p}.blocks"), &ba, &bb)?;
    let ea: Vec<_> = a.sym_exprs.iter().map(|(o, e)| (*o, expr(e))).collect();
    let eb: Vec<_> = b.sym_exprs.iter().map(|(o, e)| (*o, expr(e))).collect();
    same(&format!("{p}.sym_exprs"), &ea, &eb)
}

fn aux(p: &str, a: &AuxDataTables, b: &AuxDataTables) -> Result<(), String> {
    let la: Vec<(&[u8], &[u8], &[u8])> =
        a.iter().map(|(l, e)| (l.as_bytes(), e.type_spec.as_bytes(), e.bytes.as_slice())).collect();
    let lb: Vec<(&[u8], &[u8], &[u8])> =
        b.iter().map(|(l, e)| (l.as_bytes(), e.type_spec.as_bytes(), e.bytes.as_slice())).collect();
    same(&format!("{p}.len"), &la.len(), &lb.len())?;
    for (x, y) in la.iter().zip(&lb) {
        same(&format!("{p}[{}]", String::from_utf8_lossy(x.0)), x, y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_ir, GenConfig};

    #[test]
    fn reflexive_and_detects_changes() {
        let ir = random_ir(&mut crate::rng(3), &GenConfig::default());
        assert_eq!(structurally_equal(&ir, &ir.clone()), Ok(()));
        let mut other = ir.clone();
        other.set_version(ir.version().wrapping_add(1));
        assert!(structurally_equal(&ir, &other).unwrap_err().starts_with("ir.version"));
        let mut other = ir.clone();
        other.aux_data_mut().insert_raw(
            "zz",
            bir_core::AuxDataEntry { type_spec: "uint64".into(), bytes: vec![0; 8] },
        );
        assert!(structurally_equal(&ir, &other).is_err());
    }
}
