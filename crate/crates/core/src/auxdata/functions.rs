//! Functions as AuxData: a function is a generated UUID tying together its
//! block set, entry set and name symbol across three sanctioned tables.

use std::collections::{BTreeMap, BTreeSet};

use crate::ir::{Ir, NodeKind};
use crate::model::Module;
use crate::uuid::Uuid;

use super::{AuxDataError, FUNCTION_BLOCKS, FUNCTION_ENTRIES, FUNCTION_NAMES, SYMBOL_FORWARDING};

type UuidSets = BTreeMap<Uuid, BTreeSet<Uuid>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub uuid: Uuid,
    pub blocks: BTreeSet<Uuid>,
    pub entries: BTreeSet<Uuid>,
    pub name_symbol: Option<Uuid>,
}

pub fn make_function(
    ir: &mut Ir,
    module: Uuid,
    blocks: BTreeSet<Uuid>,
    entries: BTreeSet<Uuid>,
    name_symbol: Uuid,
) -> Result<Uuid, AuxDataError> {
    make_function_with_uuid(ir, module, Uuid::new(), blocks, entries, name_symbol)
}

/// Like [`make_function`] with a caller-chosen function UUID.
pub fn make_function_with_uuid(
    ir: &mut Ir,
    module: Uuid,
    function: Uuid,
    blocks: BTreeSet<Uuid>,
    entries: BTreeSet<Uuid>,
    name_symbol: Uuid,
) -> Result<Uuid, AuxDataError> {
    if !entries.is_subset(&blocks) {
        return Err(AuxDataError::EntriesNotSubset);
    }
    for &b in &blocks {
        if ir.kind_of(b) != Some(NodeKind::CodeBlock) {
            return Err(AuxDataError::DanglingReference(b));
        }
    }
    if ir.kind_of(name_symbol) != Some(NodeKind::Symbol) {
        return Err(AuxDataError::DanglingReference(name_symbol));
    }
    let tables = ir
        .module_aux_data_mut(module)
        .map_err(|_| AuxDataError::DanglingReference(module))?;

    let mut fb: UuidSets = tables.get(FUNCTION_BLOCKS)?.unwrap_or_default();
    let mut fe: UuidSets = tables.get(FUNCTION_ENTRIES)?.unwrap_or_default();
    let mut fnames: BTreeMap<Uuid, Uuid> = tables.get(FUNCTION_NAMES)?.unwrap_or_default();
    fb.insert(function, blocks);
    fe.insert(function, entries);
    fnames.insert(function, name_symbol);
    tables.set(FUNCTION_BLOCKS, &fb)?;
    tables.set(FUNCTION_ENTRIES, &fe)?;
    tables.set(FUNCTION_NAMES, &fnames)?;
    Ok(function)
}

/// Joins the three function tables by function UUID, ordered by UUID.
/// A function missing from a table gets an empty set or no name.
pub fn get_functions(module: &Module) -> Result<Vec<Function>, AuxDataError> {
    let t = &module.aux_data;
    let fb: UuidSets = t.get(FUNCTION_BLOCKS)?.unwrap_or_default();
    let fe: UuidSets = t.get(FUNCTION_ENTRIES)?.unwrap_or_default();
    let fnames: BTreeMap<Uuid, Uuid> = t.get(FUNCTION_NAMES)?.unwrap_or_default();

    let ids: BTreeSet<Uuid> = fb.keys().chain(fe.keys()).chain(fnames.keys()).copied().collect();
    Ok(ids
        .into_iter()
        .map(|id| Function {
            uuid: id,
            blocks: fb.get(&id).cloned().unwrap_or_default(),
            entries: fe.get(&id).cloned().unwrap_or_default(),
            name_symbol: fnames.get(&id).copied(),
        })
        .collect())
}

/// Follows `symbolForwarding` from `symbol` until an unmapped symbol.
pub fn forward_symbol(module: &Module, symbol: Uuid) -> Result<Uuid, AuxDataError> {
    let map: BTreeMap<Uuid, Uuid> = module.aux_data.get(SYMBOL_FORWARDING)?.unwrap_or_default();
    let mut seen = BTreeSet::from([symbol]);
    let mut cur = symbol;
    while let Some(&next) = map.get(&cur) {
        if !seen.insert(next) {
            return Err(AuxDataError::ForwardingCycle(next));
        }
        cur = next;
    }
    Ok(cur)
}
