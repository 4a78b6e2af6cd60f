//! One defect injector per violation code. Each turns a valid IR into one
//! on which the validator must report (at least) that code.

use std::collections::{BTreeMap, BTreeSet};

use bir_core::auxdata::{AuxDataEntry, ALIGNMENT, FUNCTION_BLOCKS, FUNCTION_ENTRIES};
use bir_core::{
    ByteInterval, CodeBlock, Ir, Module, Section, Symbol, SymbolPayload, SymbolicExpression, Uuid, ViolationCode,
};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::gen::uuid;

/// Applies the defect for `code` to `ir`.
pub fn inject(ir: &mut Ir, code: ViolationCode, rng: &mut impl Rng) {
    match code {
        ViolationCode::DuplicateUuid => {
            let m = ensure_module(ir, rng);
            let existing = {
                let all: Vec<Uuid> = ir.all_uuids().into_iter().map(|(u, _)| u).collect();
                *all.choose(rng).unwrap()
            };
            ir.modules_mut()[m].symbols.push(Symbol { uuid: existing, name: "dup".into(), payload: SymbolPayload::Undefined });
        }
        ViolationCode::DanglingReference => {
            let m = ensure_module(ir, rng);
            let ghost = uuid(rng);
            ir.modules_mut()[m].symbols.push(Symbol { uuid: uuid(rng), name: "ghost".into(), payload: SymbolPayload::Referent(ghost) });
        }
        ViolationCode::BlockOutOfRange => {
            let i = ensure_interval(ir, rng);
            let bi = ir.interval_mut(i).unwrap();
            let offset = bi.size;
            bi.blocks.push(bir_core::BlockEntry { offset, block: CodeBlock { uuid: uuid(rng), size: 1 }.into() });
        }
        ViolationCode::ContentsExceedSize => {
            let i = ensure_interval(ir, rng);
            let bi = ir.interval_mut(i).unwrap();
            bi.contents.resize(bi.size as usize + rng.gen_range(1..4), 0xaa);
        }
        ViolationCode::SymExprOutOfRange => {
            let i = ensure_interval(ir, rng);
            let sym = ensure_symbol(ir, rng);
            let bi = ir.interval_mut(i).unwrap();
            let offset = bi.size + rng.gen_range(0..4);
            bi.sym_exprs.insert(offset, SymbolicExpression::SymAddrConst { symbol: sym, offset: 0 });
        }
        ViolationCode::CfgEndpointNotCodeOrProxy => {
            let m = ensure_module(ir, rng);
            let module = ir.modules()[m].uuid;
            ir.cfg_mut().add_vertex(module);
        }
        ViolationCode::AuxDataDecodeFailure => {
            let m = ensure_module(ir, rng);
            let bytes: Vec<u8> = (0..rng.gen_range(1..8)).map(|_| rng.gen()).collect();
            ir.modules_mut()[m]
                .aux_data
                .insert_raw(ALIGNMENT, AuxDataEntry { type_spec: "mapping<UUID,uint64>".into(), bytes });
        }
        ViolationCode::FunctionTableInconsistent => {
            let i = ensure_interval(ir, rng);
            let block = ir.add_code_block(i, 0, 0).unwrap();
            let m = ir.owning_module(i).unwrap().uuid;
            let t = ir.module_aux_data_mut(m).unwrap();
            let mut entries: BTreeMap<Uuid, BTreeSet<Uuid>> = t.get(FUNCTION_ENTRIES).ok().flatten().unwrap_or_default();
            let mut blocks: BTreeMap<Uuid, BTreeSet<Uuid>> = t.get(FUNCTION_BLOCKS).ok().flatten().unwrap_or_default();
            let f = uuid(rng);
            entries.insert(f, [block].into());
            if rng.gen_bool(0.5) {
                blocks.insert(f, BTreeSet::new());
                t.set(FUNCTION_BLOCKS, &blocks).unwrap();
            }
            t.set(FUNCTION_ENTRIES, &entries).unwrap();
        }
        ViolationCode::ScaleZero => {
            let i = ensure_interval(ir, rng);
            let sym = ensure_symbol(ir, rng);
            let size = ir.interval(i).unwrap().size;
            let offset = rng.gen_range(0..size);
            let expr = SymbolicExpression::SymAddrAddr { minuend: sym, subtrahend: sym, scale: 0, offset: 0 };
            ir.set_sym_expr(i, offset, expr).unwrap();
        }
    }
}

fn ensure_module(ir: &mut Ir, rng: &mut impl Rng) -> usize {
    if ir.modules().is_empty() {
        ir.add_module(Module::with_uuid(uuid(rng), "injected")).unwrap();
    }
    rng.gen_range(0..ir.modules().len())
}

/// An interval of nonzero size.
fn ensure_interval(ir: &mut Ir, rng: &mut impl Rng) -> Uuid {
    let candidates: Vec<Uuid> =
        ir.modules().iter().flat_map(|m| m.intervals()).filter(|bi| bi.size > 0).map(|bi| bi.uuid).collect();
    if let Some(&i) = candidates.choose(rng) {
        return i;
    }
    let m = ensure_module(ir, rng);
    let m = ir.modules()[m].uuid;
    let s = ir.add_section(m, Section::with_uuid(uuid(rng), ".injected")).unwrap();
    ir.add_interval(s, ByteInterval::with_uuid(uuid(rng), 8)).unwrap()
}

fn ensure_symbol(ir: &mut Ir, rng: &mut impl Rng) -> Uuid {
    let syms: Vec<Uuid> = ir.modules().iter().flat_map(|m| &m.symbols).map(|s| s.uuid).collect();
    if let Some(&s) = syms.choose(rng) {
        return s;
    }
    let m = ensure_module(ir, rng);
    let m = ir.modules()[m].uuid;
    ir.add_symbol(m, Symbol { uuid: uuid(rng), name: "s".into(), payload: SymbolPayload::Value(0) }).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_ir, GenConfig};
    use bir_core::validate;

    #[test]
    fn every_injector_is_detected() {
        for seed in 0..10 {
            for code in ViolationCode::ALL {
                let mut rng = crate::rng(seed);
                let mut ir = random_ir(&mut rng, &GenConfig::default());
                inject(&mut ir, code, &mut rng);
                let found: Vec<ViolationCode> = validate(&ir).iter().map(|v| v.code).collect();
                assert!(found.contains(&code), "seed {seed} {code:?}: {found:?}");
            }
        }
    }
}
