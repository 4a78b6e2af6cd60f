use std::collections::{BTreeMap, BTreeSet};

use crate::auxdata::{TypeSpec, Value, ALIGNMENT, COMMENTS, PADDING};
use crate::ir::{Ir, IrError, NodeKind};
use crate::model::{ByteInterval, Offset};
use crate::uuid::Uuid;

use super::{RewriteError, SE_ENCODINGS};

/// Tables keyed by `Offset` whose entries follow the bytes they point at.
const OFFSET_TABLES: [(&str, &str); 3] = [
    (COMMENTS, "mapping<Offset,string>"),
    (PADDING, "mapping<Offset,uint64>"),
    (SE_ENCODINGS, "mapping<Offset,uint64>"),
];

/// A remapped `Offset` key. `moved` entries win over others landing on
/// the same key.
struct Remapped {
    key: Offset,
    moved: bool,
}

/// Rewrites the keys of every `Offset`-keyed table in every module.
/// Entries whose element is in `touched` are passed to `f`; each result is
/// stored in the module owning its new element. Tables with an unexpected
/// schema or undecodable bytes are left alone for the validator to report.
fn remap_offset_tables(
    ir: &mut Ir,
    touched: &BTreeSet<Uuid>,
    f: impl Fn(Offset) -> Remapped,
) -> Result<(), RewriteError> {
    for (label, spec_text) in OFFSET_TABLES {
        let spec = TypeSpec::parse(spec_text).expect("static spec");
        let mut pending: Vec<(Remapped, Value)> = Vec::new();
        let mut decoded: Vec<Option<BTreeMap<Value, Value>>> = Vec::new();
        for m in ir.modules() {
            let map = match m.aux_data.entry(label) {
                Some(e) if e.type_spec == spec_text => match m.aux_data.get_table(label, &spec) {
                    Ok(Some(Value::Mapping(map))) => Some(map),
                    _ => None,
                },
                _ => None,
            };
            decoded.push(map);
        }
        for map in decoded.iter_mut().flatten() {
            let keys: Vec<Value> = map
                .keys()
                .filter(|k| matches!(k, Value::Offset(o) if touched.contains(&o.element)))
                .cloned()
                .collect();
            for k in keys {
                let v = map.remove(&k).unwrap();
                let Value::Offset(o) = k else { unreachable!() };
                pending.push((f(o), v));
            }
        }
        if pending.is_empty() {
            continue;
        }
        pending.sort_by_key(|(r, _)| r.moved);
        for (r, v) in pending {
            let owner = ir.owning_module(r.key.element).map(|m| m.uuid);
            let idx = ir.modules().iter().position(|m| Some(m.uuid) == owner);
            if let Some(map) = idx.and_then(|i| decoded[i].as_mut()) {
                map.insert(Value::Offset(r.key), v);
            } else if let Some(i) = idx {
                decoded[i] = Some(BTreeMap::from([(Value::Offset(r.key), v)]));
            }
        }
        let ids: Vec<Uuid> = ir.modules().iter().map(|m| m.uuid).collect();
        for (id, map) in ids.into_iter().zip(decoded) {
            if let Some(map) = map {
                let tables = ir.module_aux_data_mut(id)?;
                if map.is_empty() {
                    tables.remove(label);
                } else {
                    tables.set_table(label, &spec, &Value::Mapping(map))?;
                }
            }
        }
    }
    Ok(())
}

/// Splits an interval at `at` into two, returning `(first, second)`.
/// The second interval gets a fresh UUID and is placed right after the
/// first in its section.
pub fn split_interval(ir: &mut Ir, interval: Uuid, at: u64) -> Result<(Uuid, Uuid), RewriteError> {
    let bi = ir.interval(interval).ok_or_else(|| not_interval(ir, interval))?;
    if at == 0 || at >= bi.size {
        return Err(RewriteError::OutOfRange { offset: at, size: bi.size });
    }
    for e in &bi.blocks {
        let end = e.end().ok_or(RewriteError::OutOfRange { offset: e.offset, size: bi.size })?;
        if e.offset < at && at < end {
            return Err(RewriteError::BlockStraddlesSplit(e.block.uuid()));
        }
    }

    let second_id = fresh_uuid(ir);
    let (m, s, i) = ir.interval_loc(interval)?;
    let intervals = &mut ir.modules_mut()[m].sections[s].intervals;
    let first = &mut intervals[i];
    let mut second = ByteInterval::with_uuid(second_id, first.size - at);
    second.address = first.address.and_then(|a| a.checked_add(at));
    if (first.contents.len() as u64) > at {
        second.contents = first.contents.split_off(at as usize);
    }
    first.size = at;
    let (low, high): (Vec<_>, Vec<_>) = first.blocks.drain(..).partition(|e| e.offset < at);
    first.blocks = low;
    second.blocks = high.into_iter().map(|mut e| { e.offset -= at; e }).collect();
    second.sym_exprs = first.sym_exprs.split_off(&at).into_iter().map(|(o, x)| (o - at, x)).collect();
    intervals.insert(i + 1, second);

    remap_offset_tables(ir, &BTreeSet::from([interval]), |o| Remapped {
        key: if o.displacement >= at { Offset::new(second_id, o.displacement - at) } else { o },
        moved: false,
    })?;
    Ok((interval, second_id))
}

/// Inserts `payload` at `at`. Blocks and symbolic expressions at or after
/// `at` shift; a block strictly containing `at` grows.
pub fn insert_bytes(ir: &mut Ir, interval: Uuid, at: u64, payload: &[u8]) -> Result<(), RewriteError> {
    let bi = ir.interval(interval).ok_or_else(|| not_interval(ir, interval))?;
    let n = payload.len() as u64;
    if at > bi.size {
        return Err(RewriteError::OutOfRange { offset: at, size: bi.size });
    }
    let overflow = RewriteError::OutOfRange { offset: at, size: bi.size };
    bi.size.checked_add(n).ok_or(overflow.clone())?;
    for e in &bi.blocks {
        e.end().and_then(|end| end.checked_add(n)).ok_or(overflow.clone())?;
    }

    let mut grown = BTreeMap::new();
    let bi = ir.interval_mut(interval)?;
    bi.size += n;
    if (bi.contents.len() as u64) < at {
        bi.contents.resize(at as usize, 0);
    }
    let tail = bi.contents.split_off(at as usize);
    bi.contents.extend_from_slice(payload);
    bi.contents.extend_from_slice(&tail);
    for e in &mut bi.blocks {
        if e.offset >= at {
            e.offset += n;
        } else if e.offset + e.block.size() > at {
            grown.insert(e.block.uuid(), at - e.offset);
            let size = e.block.size() + n;
            e.block.set_size(size);
        }
    }
    let high = bi.sym_exprs.split_off(&at);
    bi.sym_exprs.extend(high.into_iter().map(|(o, x)| (o + n, x)));

    let mut touched: BTreeSet<Uuid> = grown.keys().copied().collect();
    touched.insert(interval);
    remap_offset_tables(ir, &touched, |o| {
        let threshold = if o.element == interval { Some(at) } else { grown.get(&o.element).copied() };
        let shift = threshold.is_some_and(|t| o.displacement >= t);
        Remapped {
            key: if shift { Offset::new(o.element, o.displacement + n) } else { o },
            moved: false,
        }
    })
}

/// Moves a code or data block to `dest_offset` in `dest_interval`, copying
/// its bytes and carrying along the symbolic expressions inside its range.
/// Moved expressions replace any already at their destination offsets.
pub fn move_block(ir: &mut Ir, block: Uuid, dest_interval: Uuid, dest_offset: u64) -> Result<(), RewriteError> {
    match ir.kind_of(block) {
        Some(NodeKind::ProxyBlock) => return Err(RewriteError::ProxyNotMovable(block)),
        Some(k) if k.is_block() => {}
        Some(k) => {
            return Err(IrError::WrongKind { uuid: block, expected: "CodeBlock or DataBlock", found: k.name() }.into())
        }
        None => return Err(IrError::UnknownUuid(block).into()),
    }
    let place = ir.block_placement(block).expect("block has a placement");
    let entry = *ir.block_entry(block).expect("block has an entry");
    let size = entry.block.size();
    let dest = ir.interval(dest_interval).ok_or_else(|| not_interval(ir, dest_interval))?;
    match dest_offset.checked_add(size) {
        Some(end) if end <= dest.size => {}
        _ => return Err(RewriteError::OutOfRange { offset: dest_offset, size: dest.size }),
    }
    let src = ir.interval(place.interval).expect("placement interval exists");
    let old_end = entry.offset + size;
    let moving: Vec<u64> = src.sym_exprs.range(entry.offset..old_end).map(|(&o, _)| o).collect();
    for &o in &moving {
        if let Some(other) = src
            .blocks
            .iter()
            .find(|e| e.block.uuid() != block && e.offset <= o && o < e.offset + e.block.size())
        {
            return Err(RewriteError::AmbiguousSymExprOwnership { offset: o, moving: block, other: other.block.uuid() });
        }
    }
    let bytes = src.read(entry.offset, size);

    let src_bi = ir.interval_mut(place.interval)?;
    let pos = src_bi.blocks.iter().position(|e| e.block.uuid() == block).unwrap();
    src_bi.blocks.remove(pos);
    let exprs: Vec<_> = moving.iter().map(|o| (*o, src_bi.sym_exprs.remove(o).unwrap())).collect();
    let dst_bi = ir.interval_mut(dest_interval)?;
    dst_bi.write(dest_offset, &bytes);
    dst_bi.blocks.push(crate::model::BlockEntry { offset: dest_offset, block: entry.block });
    for (o, x) in exprs {
        dst_bi.sym_exprs.insert(o - entry.offset + dest_offset, x);
    }

    let dest_module = ir.owning_module(dest_interval).map(|m| m.uuid).unwrap();
    if dest_module != place.module {
        move_alignment(ir, block, place.module, dest_module)?;
    }
    let (src_id, old_start) = (place.interval, entry.offset);
    remap_offset_tables(ir, &BTreeSet::from([src_id, dest_interval]), |o| {
        let d = o.displacement;
        if o.element == src_id && d >= old_start && d < old_end {
            Remapped { key: Offset::new(dest_interval, d - old_start + dest_offset), moved: true }
        } else {
            Remapped { key: o, moved: false }
        }
    })
}

fn move_alignment(ir: &mut Ir, block: Uuid, from: Uuid, to: Uuid) -> Result<(), RewriteError> {
    let src = ir.module_aux_data_mut(from)?;
    let Ok(Some(mut table)) = src.get::<BTreeMap<Uuid, u64>>(ALIGNMENT) else {
        return Ok(());
    };
    let Some(a) = table.remove(&block) else {
        return Ok(());
    };
    if table.is_empty() {
        src.remove(ALIGNMENT);
    } else {
        src.set(ALIGNMENT, &table)?;
    }
    let dst = ir.module_aux_data_mut(to)?;
    let mut table: BTreeMap<Uuid, u64> = dst.get(ALIGNMENT)?.unwrap_or_default();
    table.insert(block, a);
    dst.set(ALIGNMENT, &table)?;
    Ok(())
}

fn fresh_uuid(ir: &Ir) -> Uuid {
    loop {
        let id = Uuid::new();
        if ir.find_node(id).is_none() {
            return id;
        }
    }
}

fn not_interval(ir: &Ir, id: Uuid) -> RewriteError {
    match ir.kind_of(id) {
        None => IrError::UnknownUuid(id).into(),
        Some(k) => IrError::WrongKind { uuid: id, expected: "ByteInterval", found: k.name() }.into(),
    }
}
