use std::collections::BTreeMap;

use crate::auxdata::ALIGNMENT;
use crate::ir::Ir;
use crate::uuid::Uuid;

use super::RewriteError;

/// Interval UUID to base address.
pub type AddressAssignment = BTreeMap<Uuid, u64>;

/// Assigns every interval a fresh base address, packing them from `base`
/// in stored order. Each base is the lowest free address at which every
/// block with an `alignment` entry in its module lands on a multiple of
/// that alignment. Existing interval addresses are ignored.
pub fn layout(ir: &Ir, base: u64) -> Result<AddressAssignment, RewriteError> {
    let mut out = AddressAssignment::new();
    let mut cursor = base;
    for module in ir.modules() {
        let align: BTreeMap<Uuid, u64> = module.aux_data.get(ALIGNMENT)?.unwrap_or_default();
        for bi in module.intervals() {
            let overflow = RewriteError::AddressOverflow(bi.uuid);
            let mut constraints = Vec::new();
            for e in &bi.blocks {
                let id = e.block.uuid();
                if let Some(&a) = align.get(&id) {
                    if !a.is_power_of_two() {
                        return Err(RewriteError::AlignmentNotPowerOfTwo { block: id, alignment: a });
                    }
                    constraints.push((a, e.offset));
                }
            }
            // base ≡ -offset (mod a) for each constraint; with power-of-two
            // alignments the largest one fixes the residue for all others.
            let (modulus, residue) = match constraints.iter().max_by_key(|(a, _)| *a) {
                Some(&(a, off)) => (a, off.wrapping_neg() & (a - 1)),
                None => (1, 0),
            };
            if constraints.iter().any(|&(a, off)| residue.wrapping_add(off) & (a - 1) != 0) {
                return Err(RewriteError::UnsatisfiableAlignment(bi.uuid));
            }
            let bump = residue.wrapping_sub(cursor) & (modulus - 1);
            let start = cursor.checked_add(bump).ok_or(overflow.clone())?;
            cursor = start.checked_add(bi.size).ok_or(overflow)?;
            out.insert(bi.uuid, start);
        }
    }
    Ok(out)
}
