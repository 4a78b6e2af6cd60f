//! Small hand-built IRs with fixed UUIDs, used for golden-file tests.

use std::collections::BTreeMap;

use bir_core::auxdata::{self, make_function_with_uuid};
use bir_core::rewrite::{set_encoding, EncodingDirective, Endianness};
use bir_core::{
    save_unchecked, ByteInterval, CodeBlock, DataBlock, EdgeKind, EdgeLabel, FileFormat, Ir, Isa, Module, Offset,
    ProxyBlock, Section, SectionFlag, Symbol, SymbolPayload, SymbolicExpression, Uuid,
};

/// Hands out readable UUIDs `...0001`, `...0002`, ... under a prefix.
struct Ids(u128);

impl Ids {
    fn new(prefix: u32) -> Self {
        Ids((prefix as u128) << 96)
    }

    fn next(&mut self) -> Uuid {
        self.0 += 1;
        Uuid::from_u128(self.0)
    }
}

fn loaded(name: &str, id: Uuid, extra: &[SectionFlag]) -> Section {
    let mut flags = vec![SectionFlag::Loaded, SectionFlag::Readable, SectionFlag::Initialized];
    flags.extend_from_slice(extra);
    Section::with_uuid(id, name).with_flags(flags)
}

fn elf_module(ids: &mut Ids, name: &str) -> Module {
    let mut m = Module::with_uuid(ids.next(), name);
    m.isa = Isa::X64;
    m.file_format = FileFormat::Elf;
    m
}

pub fn empty() -> Ir {
    Ir::with_uuid(Ids::new(1).next(), 1)
}

pub fn single_block() -> Ir {
    let mut ids = Ids::new(2);
    let mut ir = Ir::with_uuid(ids.next(), 1);
    let m = ir.add_module(elf_module(&mut ids, "hello")).unwrap();
    let s = ir.add_section(m, loaded(".text", ids.next(), &[SectionFlag::Executable])).unwrap();
    let bi = ByteInterval { uuid: ids.next(), ..ByteInterval::from_contents(vec![0xde, 0xad, 0xbe, 0xef]) }.at_address(0x401000);
    let i = ir.add_interval(s, bi).unwrap();
    let b = ir.add_block(i, 0, CodeBlock { uuid: ids.next(), size: 4 }).unwrap();
    ir.add_symbol(m, Symbol { uuid: ids.next(), name: "main".into(), payload: SymbolPayload::Referent(b) }).unwrap();
    ir
}

pub fn call_proxy() -> Ir {
    let mut ids = Ids::new(3);
    let mut ir = Ir::with_uuid(ids.next(), 1);
    let m = ir.add_module(elf_module(&mut ids, "caller")).unwrap();
    let s = ir.add_section(m, loaded(".text", ids.next(), &[SectionFlag::Executable])).unwrap();
    let contents: Vec<u8> = (0u8..24).collect();
    let i = ir.add_interval(s, ByteInterval { uuid: ids.next(), ..ByteInterval::from_contents(contents) }).unwrap();
    let a = ir.add_block(i, 0, CodeBlock { uuid: ids.next(), size: 8 }).unwrap();
    let b = ir.add_block(i, 8, CodeBlock { uuid: ids.next(), size: 8 }).unwrap();
    let c = ir.add_block(i, 16, CodeBlock { uuid: ids.next(), size: 8 }).unwrap();
    let puts = ir.add_proxy_block(m, ProxyBlock { uuid: ids.next() }).unwrap();
    ir.add_edge(a, puts, EdgeLabel::new(false, true, EdgeKind::Call)).unwrap();
    ir.add_edge(b, puts, EdgeLabel::new(false, true, EdgeKind::Call)).unwrap();
    ir.add_edge(a, b, EdgeLabel::fallthrough()).unwrap();
    ir.add_edge(b, c, EdgeLabel::new(true, true, EdgeKind::Branch)).unwrap();
    ir.add_edge(c, a, EdgeLabel::new(false, false, EdgeKind::Return)).unwrap();
    ir.add_symbol(m, Symbol { uuid: ids.next(), name: "puts".into(), payload: SymbolPayload::Referent(puts) }).unwrap();
    ir
}

pub fn overlapping() -> Ir {
    let mut ids = Ids::new(4);
    let mut ir = Ir::with_uuid(ids.next(), 1);
    let m = ir.add_module(elf_module(&mut ids, "overlap")).unwrap();
    let s = ir.add_section(m, loaded(".text", ids.next(), &[SectionFlag::Executable])).unwrap();
    let contents: Vec<u8> = (0..40u8).map(|b| b.wrapping_mul(7)).collect();
    let i = ir.add_interval(s, ByteInterval { uuid: ids.next(), ..ByteInterval::from_contents(contents) }.at_address(0x1000)).unwrap();
    let outer = ir.add_block(i, 0, CodeBlock { uuid: ids.next(), size: 40 }).unwrap();
    let inner = ir.add_block(i, 1, CodeBlock { uuid: ids.next(), size: 6 }).unwrap();
    ir.add_block(i, 30, DataBlock { uuid: ids.next(), size: 10 }).unwrap();
    ir.add_edge(inner, outer, EdgeLabel::new(false, true, EdgeKind::Branch)).unwrap();
    ir
}

pub fn functions() -> Ir {
    let mut ids = Ids::new(5);
    let mut ir = Ir::with_uuid(ids.next(), 1);
    let m = ir.add_module(elf_module(&mut ids, "funcs")).unwrap();
    let s = ir.add_section(m, loaded(".text", ids.next(), &[SectionFlag::Executable])).unwrap();
    let i = ir.add_interval(s, ByteInterval { uuid: ids.next(), ..ByteInterval::from_contents(vec![0x90; 32]) }).unwrap();
    let blocks: Vec<Uuid> = (0..4).map(|k| ir.add_block(i, k * 8, CodeBlock { uuid: ids.next(), size: 8 }).unwrap()).collect();
    let f_sym = ir.add_symbol(m, Symbol { uuid: ids.next(), name: "f".into(), payload: SymbolPayload::Referent(blocks[0]) }).unwrap();
    let g_sym = ir.add_symbol(m, Symbol { uuid: ids.next(), name: "g".into(), payload: SymbolPayload::Referent(blocks[2]) }).unwrap();
    make_function_with_uuid(&mut ir, m, ids.next(), [blocks[0], blocks[1]].into(), [blocks[0]].into(), f_sym).unwrap();
    make_function_with_uuid(&mut ir, m, ids.next(), [blocks[2], blocks[3]].into(), [blocks[2], blocks[3]].into(), g_sym)
        .unwrap();
    ir.add_edge(blocks[0], blocks[1], EdgeLabel::fallthrough()).unwrap();
    ir.add_edge(blocks[1], blocks[2], EdgeLabel::new(false, true, EdgeKind::Call)).unwrap();
    let t = ir.module_aux_data_mut(m).unwrap();
    t.set(auxdata::TYPES, &BTreeMap::from([(blocks[0], "int(void)".to_string())])).unwrap();
    t.set(auxdata::COMMENTS, &BTreeMap::from([(Offset::new(blocks[1], 2), "loop head".to_string())])).unwrap();
    ir
}

pub fn symexprs() -> Ir {
    let mut ids = Ids::new(6);
    let mut ir = Ir::with_uuid(ids.next(), 1);
    let m = ir.add_module(elf_module(&mut ids, "syms")).unwrap();
    let text = ir.add_section(m, loaded(".text", ids.next(), &[SectionFlag::Executable])).unwrap();
    let data = ir.add_section(m, loaded(".data", ids.next(), &[SectionFlag::Writable])).unwrap();
    let ti = ir.add_interval(text, ByteInterval { uuid: ids.next(), ..ByteInterval::from_contents(vec![0xcc; 16]) }).unwrap();
    let di = ir.add_interval(data, ByteInterval { uuid: ids.next(), ..ByteInterval::from_contents(vec![0; 16]) }).unwrap();
    let code = ir.add_block(ti, 0, CodeBlock { uuid: ids.next(), size: 16 }).unwrap();
    let table = ir.add_block(di, 0, DataBlock { uuid: ids.next(), size: 16 }).unwrap();
    let s = ir.add_symbol(m, Symbol { uuid: ids.next(), name: "S".into(), payload: SymbolPayload::Referent(code) }).unwrap();
    let t = ir.add_symbol(m, Symbol { uuid: ids.next(), name: "T".into(), payload: SymbolPayload::Referent(table) }).unwrap();
    ir.add_symbol(m, Symbol { uuid: ids.next(), name: "ABS".into(), payload: SymbolPayload::Value(-5) }).unwrap();
    ir.add_symbol(m, Symbol { uuid: ids.next(), name: "EXT".into(), payload: SymbolPayload::Undefined }).unwrap();
    ir.set_sym_expr(ti, 2, SymbolicExpression::SymAddrConst { symbol: t, offset: 8 }).unwrap();
    ir.set_sym_expr(di, 0, SymbolicExpression::SymAddrAddr { minuend: t, subtrahend: s, scale: 4, offset: -1 }).unwrap();
    ir.set_sym_expr(di, 8, SymbolicExpression::SymAddrConst { symbol: s, offset: 0 }).unwrap();
    ir
}

pub fn multi_module() -> Ir {
    let mut ids = Ids::new(7);
    let mut ir = Ir::with_uuid(ids.next(), 3);
    let exe = ir.add_module(elf_module(&mut ids, "app")).unwrap();
    let mut lib = Module::with_uuid(ids.next(), "libc.so");
    lib.isa = Isa::ARM64;
    lib.file_format = FileFormat::Elf;
    lib.preferred_base = Some(0x7f00_0000_0000);
    let lib = ir.add_module(lib).unwrap();
    let s1 = ir.add_section(exe, loaded(".text", ids.next(), &[SectionFlag::Executable])).unwrap();
    let s2 = ir.add_section(lib, loaded(".text", ids.next(), &[SectionFlag::Executable])).unwrap();
    let i1 = ir.add_interval(s1, ByteInterval { uuid: ids.next(), ..ByteInterval::from_contents(vec![1; 8]) }).unwrap();
    let i2 = ir.add_interval(s2, ByteInterval { uuid: ids.next(), ..ByteInterval::from_contents(vec![2; 8]) }).unwrap();
    let a = ir.add_block(i1, 0, CodeBlock { uuid: ids.next(), size: 8 }).unwrap();
    let b = ir.add_block(i2, 0, CodeBlock { uuid: ids.next(), size: 8 }).unwrap();
    let plt = ir.add_proxy_block(exe, ProxyBlock { uuid: ids.next() }).unwrap();
    ir.add_edge(a, plt, EdgeLabel::new(false, true, EdgeKind::Call)).unwrap();
    ir.add_edge(a, b, EdgeLabel::new(false, false, EdgeKind::Call)).unwrap();
    ir.add_edge(b, a, EdgeLabel::new(false, false, EdgeKind::Return)).unwrap();
    let local = ir.add_symbol(exe, Symbol { uuid: ids.next(), name: "memcpy@plt".into(), payload: SymbolPayload::Referent(plt) }).unwrap();
    let target = ir.add_symbol(lib, Symbol { uuid: ids.next(), name: "memcpy".into(), payload: SymbolPayload::Referent(b) }).unwrap();
    ir.module_aux_data_mut(exe).unwrap().set(auxdata::SYMBOL_FORWARDING, &BTreeMap::from([(local, target)])).unwrap();
    ir
}

pub fn bss() -> Ir {
    let mut ids = Ids::new(8);
    let mut ir = Ir::with_uuid(ids.next(), 1);
    let m = ir.add_module(elf_module(&mut ids, "zeros")).unwrap();
    let s = Section::with_uuid(ids.next(), ".bss").with_flags([SectionFlag::Loaded, SectionFlag::Readable, SectionFlag::Writable]);
    let s = ir.add_section(m, s).unwrap();
    let mut bi = ByteInterval::with_uuid(ids.next(), 64).at_address(0x600000);
    bi.contents = vec![7, 7];
    let i = ir.add_interval(s, bi).unwrap();
    ir.add_block(i, 0, DataBlock { uuid: ids.next(), size: 32 }).unwrap();
    ir.add_block(i, 32, DataBlock { uuid: ids.next(), size: 32 }).unwrap();
    ir
}

pub fn unknown_aux() -> Ir {
    let mut ids = Ids::new(9);
    let mut ir = Ir::with_uuid(ids.next(), 1);
    let m = ir.add_module(elf_module(&mut ids, "aux")).unwrap();
    ir.aux_data_mut().set("compilerVersion", &"cc 12.1".to_string()).unwrap();
    let t = ir.module_aux_data_mut(m).unwrap();
    t.set("profileCounts", &BTreeMap::from([(Uuid::from_u128(1), 10u64), (Uuid::from_u128(2), 3)])).unwrap();
    t.set("tags", &vec![("hot".to_string(), -1i64), ("cold".to_string(), 2)]).unwrap();
    ir
}

pub fn aligned_layout() -> Ir {
    let mut ids = Ids::new(10);
    let mut ir = Ir::with_uuid(ids.next(), 1);
    let m = ir.add_module(elf_module(&mut ids, "layout")).unwrap();
    let s = ir.add_section(m, loaded(".text", ids.next(), &[SectionFlag::Executable])).unwrap();
    let i1 = ir.add_interval(s, ByteInterval { uuid: ids.next(), ..ByteInterval::from_contents(vec![0x11; 5]) }).unwrap();
    let i2 = ir.add_interval(s, ByteInterval { uuid: ids.next(), ..ByteInterval::from_contents(vec![0x22; 16]) }).unwrap();
    let a = ir.add_block(i1, 0, CodeBlock { uuid: ids.next(), size: 5 }).unwrap();
    let b = ir.add_block(i2, 0, CodeBlock { uuid: ids.next(), size: 16 }).unwrap();
    let sa = ir.add_symbol(m, Symbol { uuid: ids.next(), name: "a".into(), payload: SymbolPayload::Referent(a) }).unwrap();
    let sb = ir.add_symbol(m, Symbol { uuid: ids.next(), name: "b".into(), payload: SymbolPayload::Referent(b) }).unwrap();
    ir.module_aux_data_mut(m).unwrap().set(auxdata::ALIGNMENT, &BTreeMap::from([(b, 16u64)])).unwrap();
    ir.set_sym_expr(i1, 1, SymbolicExpression::SymAddrConst { symbol: sb, offset: 0 }).unwrap();
    set_encoding(&mut ir, i1, 1, EncodingDirective::new(4, Endianness::Little, true)).unwrap();
    ir.set_sym_expr(i2, 0, SymbolicExpression::SymAddrConst { symbol: sa, offset: 4 }).unwrap();
    set_encoding(&mut ir, i2, 0, EncodingDirective::new(8, Endianness::Little, false)).unwrap();
    ir.set_sym_expr(i2, 8, SymbolicExpression::SymAddrAddr { minuend: sb, subtrahend: sa, scale: 1, offset: 0 }).unwrap();
    set_encoding(&mut ir, i2, 8, EncodingDirective::new(2, Endianness::Big, false)).unwrap();
    ir
}

/// The valid golden fixtures, by file stem.
pub fn all() -> Vec<(&'static str, Ir)> {
    vec![
        ("empty", empty()),
        ("single_block", single_block()),
        ("call_proxy", call_proxy()),
        ("overlapping", overlapping()),
        ("functions", functions()),
        ("symexprs", symexprs()),
        ("multi_module", multi_module()),
        ("bss", bss()),
        ("unknown_aux", unknown_aux()),
        ("aligned_layout", aligned_layout()),
    ]
}

/// A file that loads leniently but has one symbol with a dangling referent.
pub fn malformed_bytes() -> Vec<u8> {
    let mut ir = single_block();
    ir.modules_mut()[0].symbols.push(Symbol {
        uuid: Uuid::from_u128(0xbad),
        name: "dangling".into(),
        payload: SymbolPayload::Referent(Uuid::from_u128(0xdead)),
    });
    save_unchecked(&ir)
}

/// A valid file cut short.
pub fn truncated_bytes() -> Vec<u8> {
    let full = save_unchecked(&call_proxy());
    full[..full.len() / 2].to_vec()
}

/// `aligned_layout` with a non-power-of-two alignment.
pub fn bad_alignment() -> Ir {
    let mut ir = aligned_layout();
    let m = ir.modules()[0].uuid;
    let b = ir.modules()[0].sections[0].intervals[1].blocks[0].block.uuid();
    ir.module_aux_data_mut(m).unwrap().set(auxdata::ALIGNMENT, &BTreeMap::from([(b, 3u64)])).unwrap();
    ir
}
