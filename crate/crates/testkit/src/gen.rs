//! Seeded random generators. Every UUID is drawn from the caller's RNG, so
//! a seed fully determines the output.

use std::collections::{BTreeMap, BTreeSet};

use bir_core::auxdata::{self, TypeSpec, Value};
use bir_core::rewrite::{set_encoding, EncodingDirective, Endianness};
use bir_core::{
    Block, ByteInterval, CodeBlock, DataBlock, EdgeLabel, FileFormat, Ir, Isa, Module, Offset,
    ProxyBlock, Section, SectionFlag, Symbol, SymbolPayload, SymbolicExpression, Uuid,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn uuid(rng: &mut impl Rng) -> Uuid {
    Uuid::from_bytes(rng.gen())
}

pub fn string(rng: &mut impl Rng, max_len: usize) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'z', '_', '.', '0', '9', ' ', 'é', 'λ', '→', '\u{1F600}'];
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

/// A type specifier of depth at most `max_depth`.
pub fn type_spec(rng: &mut impl Rng, max_depth: usize) -> TypeSpec {
    let leaf = max_depth <= 1 || rng.gen_bool(0.35);
    if leaf {
        return match rng.gen_range(0..5) {
            0 => TypeSpec::Uuid,
            1 => TypeSpec::Uint64,
            2 => TypeSpec::Int64,
            3 => TypeSpec::String,
            _ => TypeSpec::Offset,
        };
    }
    let d = max_depth - 1;
    match rng.gen_range(0..4) {
        0 => TypeSpec::sequence(type_spec(rng, d)),
        1 => TypeSpec::set(type_spec(rng, d)),
        2 => TypeSpec::mapping(type_spec(rng, d), type_spec(rng, d)),
        _ => TypeSpec::Tuple((0..rng.gen_range(1..=3)).map(|_| type_spec(rng, d)).collect()),
    }
}

/// A value inhabiting `spec`.
pub fn value(rng: &mut impl Rng, spec: &TypeSpec) -> Value {
    match spec {
        TypeSpec::Uuid => Value::Uuid(uuid(rng)),
        TypeSpec::Uint64 => Value::U64(wide_u64(rng)),
        TypeSpec::Int64 => Value::I64(wide_u64(rng) as i64),
        TypeSpec::String => Value::String(string(rng, 12)),
        TypeSpec::Offset => Value::Offset(Offset::new(uuid(rng), wide_u64(rng))),
        TypeSpec::Sequence(e) => Value::Sequence((0..rng.gen_range(0..4)).map(|_| value(rng, e)).collect()),
        TypeSpec::Set(e) => Value::Set((0..rng.gen_range(0..4)).map(|_| value(rng, e)).collect()),
        TypeSpec::Mapping(k, v) => {
            Value::Mapping((0..rng.gen_range(0..4)).map(|_| (value(rng, k), value(rng, v))).collect())
        }
        TypeSpec::Tuple(items) => Value::Tuple(items.iter().map(|t| value(rng, t)).collect()),
    }
}

fn wide_u64(rng: &mut impl Rng) -> u64 {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(0..4),
        1 => rng.gen_range(0..0x1_0000),
        2 => u64::MAX - rng.gen_range(0..4),
        _ => rng.gen(),
    }
}

/// Size limits for [`random_ir`]. Totals are across the whole IR.
#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub max_modules: usize,
    pub max_intervals: usize,
    pub max_blocks: usize,
    pub max_edges: usize,
    pub max_interval_size: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_modules: 4, max_intervals: 64, max_blocks: 512, max_edges: 1024, max_interval_size: 256 }
    }
}

/// A random valid IR exercising every entity kind, overlapping blocks,
/// both symbolic expression forms, every edge label, the sanctioned tables
/// and tables with unknown labels.
pub fn random_ir(rng: &mut impl Rng, cfg: &GenConfig) -> Ir {
    let mut ir = Ir::with_uuid(uuid(rng), rng.gen());
    let n_modules = rng.gen_range(0..=cfg.max_modules);
    let mut modules = Vec::new();
    let mut sections = Vec::new();
    for _ in 0..n_modules {
        let mut m = Module::with_uuid(uuid(rng), string(rng, 8));
        m.isa = *Isa::ALL.choose(rng).unwrap();
        m.file_format = *FileFormat::ALL.choose(rng).unwrap();
        m.preferred_base = rng.gen_bool(0.5).then(|| rng.gen());
        let id = ir.add_module(m).unwrap();
        modules.push(id);
        for _ in 0..rng.gen_range(0..=3) {
            let flags: Vec<SectionFlag> = SectionFlag::ALL.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
            let s = Section::with_uuid(uuid(rng), string(rng, 6)).with_flags(flags);
            sections.push(ir.add_section(id, s).unwrap());
        }
    }

    let mut intervals = Vec::new();
    if !sections.is_empty() {
        for _ in 0..rng.gen_range(0..=cfg.max_intervals) {
            let size = rng.gen_range(0..=cfg.max_interval_size);
            let clen = if rng.gen_bool(0.2) { rng.gen_range(0..=size) } else { size };
            let mut bi = ByteInterval::with_uuid(uuid(rng), size);
            bi.contents = (0..clen).map(|_| rng.gen()).collect();
            bi.address = rng.gen_bool(0.5).then(|| rng.gen_range(0..u64::MAX - size));
            let s = *sections.choose(rng).unwrap();
            intervals.push(ir.add_interval(s, bi).unwrap());
        }
    }

    let mut code = Vec::new();
    let mut data = Vec::new();
    if !intervals.is_empty() {
        for _ in 0..rng.gen_range(0..=cfg.max_blocks) {
            let i = *intervals.choose(rng).unwrap();
            let size = ir.interval(i).unwrap().size;
            let offset = rng.gen_range(0..=size);
            let len = rng.gen_range(0..=size - offset);
            let block: Block = if rng.gen_bool(0.6) {
                CodeBlock { uuid: uuid(rng), size: len }.into()
            } else {
                DataBlock { uuid: uuid(rng), size: len }.into()
            };
            let id = ir.add_block(i, offset, block).unwrap();
            if block.is_code() { code.push(id) } else { data.push(id) }
        }
    }

    let mut proxies = Vec::new();
    let mut symbols = Vec::new();
    for &m in &modules {
        for _ in 0..rng.gen_range(0..=3) {
            proxies.push(ir.add_proxy_block(m, ProxyBlock { uuid: uuid(rng) }).unwrap());
        }
        for _ in 0..rng.gen_range(0..=12) {
            let blocks: Vec<Uuid> = code.iter().chain(&data).chain(&proxies).copied().collect();
            let payload = match rng.gen_range(0..3) {
                0 => SymbolPayload::Value(wide_u64(rng) as i64),
                1 if !blocks.is_empty() => SymbolPayload::Referent(*blocks.choose(rng).unwrap()),
                _ => SymbolPayload::Undefined,
            };
            symbols.push(ir.add_symbol(m, Symbol { uuid: uuid(rng), name: string(rng, 10), payload }).unwrap());
        }
    }

    if !symbols.is_empty() {
        for &i in &intervals {
            let size = ir.interval(i).unwrap().size;
            if size == 0 {
                continue;
            }
            for _ in 0..rng.gen_range(0..=6) {
                let expr = if rng.gen_bool(0.5) {
                    SymbolicExpression::SymAddrConst {
                        symbol: *symbols.choose(rng).unwrap(),
                        offset: wide_u64(rng) as i64,
                    }
                } else {
                    let mut scale = wide_u64(rng) as i64;
                    if scale == 0 {
                        scale = 1;
                    }
                    SymbolicExpression::SymAddrAddr {
                        minuend: *symbols.choose(rng).unwrap(),
                        subtrahend: *symbols.choose(rng).unwrap(),
                        scale,
                        offset: wide_u64(rng) as i64,
                    }
                };
                ir.set_sym_expr(i, rng.gen_range(0..size), expr).unwrap();
            }
        }
    }

    let nodes: Vec<Uuid> = code.iter().chain(&proxies).copied().collect();
    if !nodes.is_empty() {
        let labels: Vec<EdgeLabel> = EdgeLabel::all().filter(|l| l.is_well_formed()).collect();
        for _ in 0..rng.gen_range(0..=cfg.max_edges) {
            let (a, b) = (*nodes.choose(rng).unwrap(), *nodes.choose(rng).unwrap());
            let _ = ir.add_edge(a, b, *labels.choose(rng).unwrap());
        }
    }

    for &m in &modules {
        add_module_tables(rng, &mut ir, m, &code, &data, &intervals, &symbols);
    }
    for _ in 0..rng.gen_range(0..=2) {
        add_unknown_table(rng, ir.aux_data_mut());
    }
    ir
}

fn add_unknown_table(rng: &mut impl Rng, tables: &mut bir_core::AuxDataTables) {
    let spec = type_spec(rng, 4);
    let v = value(rng, &spec);
    let label = format!("x.{}", string(rng, 6));
    if !auxdata::is_sanctioned(&label) {
        tables.set_table(&label, &spec, &v).unwrap();
    }
}

#[allow(clippy::too_many_arguments)]
fn add_module_tables(
    rng: &mut impl Rng,
    ir: &mut Ir,
    m: Uuid,
    code: &[Uuid],
    data: &[Uuid],
    intervals: &[Uuid],
    symbols: &[Uuid],
) {
    let pick = |rng: &mut _, pool: &[Uuid], max: usize| -> BTreeSet<Uuid> {
        if pool.is_empty() {
            return BTreeSet::new();
        }
        (0..rng_range(rng, 0, max)).map(|_| *pool.choose(rng).unwrap()).collect()
    };
    if !code.is_empty() && !symbols.is_empty() && rng.gen_bool(0.5) {
        for _ in 0..rng.gen_range(1..=3) {
            let blocks = pick(rng, code, 4);
            let entries: BTreeSet<Uuid> = blocks.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            let name = *symbols.choose(rng).unwrap();
            auxdata::make_function_with_uuid(ir, m, uuid(rng), blocks, entries, name).unwrap();
        }
    }
    let blocks: Vec<Uuid> = code.iter().chain(data).copied().collect();
    let mut elements: Vec<Uuid> = blocks.clone();
    elements.extend_from_slice(intervals);
    let t = ir.module_aux_data_mut(m).unwrap();
    if !blocks.is_empty() && rng.gen_bool(0.4) {
        let types: BTreeMap<Uuid, String> = pick(rng, &blocks, 4).into_iter().map(|b| (b, string(rng, 6))).collect();
        t.set(auxdata::TYPES, &types).unwrap();
    }
    if !blocks.is_empty() && rng.gen_bool(0.4) {
        let align: BTreeMap<Uuid, u64> = pick(rng, &blocks, 4).into_iter().map(|b| (b, 1 << rng.gen_range(0..7))).collect();
        t.set(auxdata::ALIGNMENT, &align).unwrap();
    }
    if !symbols.is_empty() && rng.gen_bool(0.3) {
        // a chain s0 -> s1 -> ... is acyclic by construction
        let chain: Vec<Uuid> = pick(rng, symbols, 4).into_iter().collect();
        let fwd: BTreeMap<Uuid, Uuid> = chain.windows(2).map(|w| (w[0], w[1])).collect();
        t.set(auxdata::SYMBOL_FORWARDING, &fwd).unwrap();
    }
    for (label, is_comment) in [(auxdata::COMMENTS, true), (auxdata::PADDING, false)] {
        if elements.is_empty() || !rng.gen_bool(0.4) {
            continue;
        }
        let mut entries = BTreeMap::new();
        for _ in 0..rng.gen_range(1..=4) {
            let e = *elements.choose(rng).unwrap();
            let size = ir.block_entry(e).map(|x| x.block.size()).or_else(|| ir.interval(e).map(|b| b.size)).unwrap();
            let key = Value::Offset(Offset::new(e, rng.gen_range(0..=size)));
            let v = if is_comment { Value::String(string(rng, 16)) } else { Value::U64(rng.gen_range(0..64)) };
            entries.insert(key, v);
        }
        let spec = auxdata::sanctioned_spec(label).unwrap();
        ir.module_aux_data_mut(m).unwrap().set_table(label, &spec, &Value::Mapping(entries)).unwrap();
    }
    if rng.gen_bool(0.3) {
        add_unknown_table(rng, ir.module_aux_data_mut(m).unwrap());
    }
}

fn rng_range(rng: &mut impl Rng, lo: usize, hi: usize) -> usize {
    rng.gen_range(lo..=hi)
}

/// A random valid IR built for relayout: every section is loaded, blocks
/// tile their intervals without overlap, every interval has full contents,
/// and every symbolic expression sits inside one block with a directive
/// in `seEncodings` whose site bytes overlap no other site. All
/// expressions refer to block symbols, so they evaluate under any layout.
pub fn random_relocatable_ir(rng: &mut impl Rng) -> Ir {
    let mut ir = Ir::with_uuid(uuid(rng), 1);
    let mut intervals = Vec::new();
    let mut code = Vec::new();
    let mut proxies = Vec::new();
    let mut block_syms = Vec::new();
    for mi in 0..rng.gen_range(1..=3) {
        let m = ir.add_module(Module::with_uuid(uuid(rng), format!("m{mi}"))).unwrap();
        proxies.push(ir.add_proxy_block(m, ProxyBlock { uuid: uuid(rng) }).unwrap());
        let mut align = BTreeMap::new();
        for si in 0..rng.gen_range(1..=3) {
            let flags = [SectionFlag::Loaded, SectionFlag::Readable, SectionFlag::Initialized];
            let s = Section::with_uuid(uuid(rng), format!(".s{si}")).with_flags(flags);
            let s = ir.add_section(m, s).unwrap();
            for _ in 0..rng.gen_range(1..=4) {
                let size = rng.gen_range(16..=200u64);
                let contents: Vec<u8> = (0..size).map(|_| rng.gen()).collect();
                let i = ir.add_interval(s, ByteInterval { uuid: uuid(rng), ..ByteInterval::from_contents(contents) }).unwrap();
                intervals.push(i);
                let mut off = 0;
                let mut tiles = Vec::new();
                while off < size {
                    let len = rng.gen_range(4..=40).min(size - off);
                    if rng.gen_bool(0.1) {
                        off += len;
                        continue;
                    }
                    let block: Block = if rng.gen_bool(0.7) {
                        CodeBlock { uuid: uuid(rng), size: len }.into()
                    } else {
                        DataBlock { uuid: uuid(rng), size: len }.into()
                    };
                    let b = ir.add_block(i, off, block).unwrap();
                    if block.is_code() {
                        code.push(b);
                    }
                    let sym = Symbol { uuid: uuid(rng), name: format!("b{}", block_syms.len()), payload: SymbolPayload::Referent(b) };
                    block_syms.push(ir.add_symbol(m, sym).unwrap());
                    tiles.push((b, off, len));
                    off += len;
                }
                if let Some(&(b, _, _)) = tiles.choose(rng) {
                    if rng.gen_bool(0.5) {
                        align.insert(b, 1u64 << rng.gen_range(0..7));
                    }
                }
            }
        }
        if !align.is_empty() {
            ir.module_aux_data_mut(m).unwrap().set(auxdata::ALIGNMENT, &align).unwrap();
        }
        let v = Symbol { uuid: uuid(rng), name: "abs".into(), payload: SymbolPayload::Value(rng.gen_range(0..0x1000)) };
        ir.add_symbol(m, v).unwrap();
    }

    for &i in &intervals {
        let tiles: Vec<(u64, u64)> = ir.interval(i).unwrap().blocks.iter().map(|e| (e.offset, e.block.size())).collect();
        for (start, len) in tiles {
            let mut cursor = start;
            for _ in 0..rng.gen_range(0..=3) {
                let (expr, d) = random_site(rng, &block_syms);
                let w = d.width as u64;
                let room = start + len - cursor;
                if room < w {
                    break;
                }
                let site = cursor + rng.gen_range(0..=(room - w).min(4));
                ir.set_sym_expr(i, site, expr).unwrap();
                set_encoding(&mut ir, i, site, d).unwrap();
                cursor = site + w;
            }
        }
    }

    let nodes: Vec<Uuid> = code.iter().chain(&proxies).copied().collect();
    let labels: Vec<EdgeLabel> = EdgeLabel::all().filter(|l| l.is_well_formed()).collect();
    for _ in 0..rng.gen_range(0..=nodes.len() * 2) {
        let (a, b) = (*nodes.choose(rng).unwrap(), *nodes.choose(rng).unwrap());
        let _ = ir.add_edge(a, b, *labels.choose(rng).unwrap());
    }
    ir
}

/// An expression over block symbols with a directive wide enough for any
/// relocatable IR this module generates, at bases below 2^31.
fn random_site(rng: &mut impl Rng, syms: &[Uuid]) -> (SymbolicExpression, EncodingDirective) {
    let s = |rng: &mut _| *syms.choose(rng).unwrap();
    let endian = if rng.gen_bool(0.5) { Endianness::Little } else { Endianness::Big };
    match rng.gen_range(0..5) {
        0 => (
            SymbolicExpression::SymAddrConst { symbol: s(rng), offset: rng.gen_range(-64..64) },
            EncodingDirective::new(8, endian, false),
        ),
        1 => (
            SymbolicExpression::SymAddrConst { symbol: s(rng), offset: rng.gen_range(-64..64) },
            EncodingDirective::new(4, endian, false),
        ),
        2 => (
            SymbolicExpression::SymAddrConst { symbol: s(rng), offset: rng.gen_range(-64..64) },
            EncodingDirective::new(4, endian, true),
        ),
        3 => (
            SymbolicExpression::SymAddrAddr {
                minuend: s(rng),
                subtrahend: s(rng),
                scale: *[1, 2, 4, 8, -1].choose(rng).unwrap(),
                offset: rng.gen_range(-16..16),
            },
            EncodingDirective::new(*[2u8, 4].choose(rng).unwrap(), endian, false),
        ),
        _ => (
            SymbolicExpression::SymAddrAddr {
                minuend: s(rng),
                subtrahend: s(rng),
                scale: 256,
                offset: rng.gen_range(-8..8),
            },
            EncodingDirective::new(1, endian, false),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bir_core::validate;

    #[test]
    fn generated_irs_are_valid() {
        for seed in 0..40 {
            let ir = random_ir(&mut crate::rng(seed), &GenConfig::default());
            let v = validate(&ir);
            assert!(v.is_empty(), "seed {seed}: {}", v[0]);
            let ir = random_relocatable_ir(&mut crate::rng(seed));
            let v = validate(&ir);
            assert!(v.is_empty(), "relocatable seed {seed}: {}", v[0]);
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = random_ir(&mut crate::rng(7), &GenConfig::default());
        let b = random_ir(&mut crate::rng(7), &GenConfig::default());
        assert_eq!(bir_core::save(&a).unwrap(), bir_core::save(&b).unwrap());
    }

    #[test]
    fn spec_depth_bound() {
        let mut rng = crate::rng(1);
        for _ in 0..500 {
            assert!(type_spec(&mut rng, 4).depth() <= 4);
        }
    }
}
