//! First-class IR entities below the [`Ir`](crate::Ir) root.
//!
//! Ownership is a plain tree: a module owns sections, a section owns byte
//! intervals, and an interval owns its blocks (by offset) and symbolic
//! expressions (by offset). Everything else refers to entities by [`Uuid`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::auxdata::AuxDataTables;
use crate::uuid::Uuid;

macro_rules! ordinal_enum {
    ($(#[$meta:meta])* $vis:vis enum $name:ident { $($variant:ident),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        #[repr(u8)]
        $vis enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn ordinal(self) -> u8 {
                self as u8
            }

            pub fn from_ordinal(v: u8) -> Option<Self> {
                Self::ALL.get(v as usize).copied()
            }

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => stringify!($variant)),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

ordinal_enum! {
    /// Instruction set of a module.
    pub enum Isa { Undefined, IA32, X64, ARM32, ARM64, MIPS32, PPC32 }
}

ordinal_enum! {
    pub enum FileFormat { Undefined, Elf, Pe, Raw }
}

ordinal_enum! {
    pub enum SectionFlag { Readable, Writable, Executable, Loaded, Initialized, ThreadLocal }
}

/// A single compilation unit (executable or library).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    pub uuid: Uuid,
    pub name: String,
    pub isa: Isa,
    pub file_format: FileFormat,
    pub preferred_base: Option<u64>,
    pub sections: Vec<Section>,
    pub symbols: Vec<Symbol>,
    pub proxy_blocks: Vec<ProxyBlock>,
    pub aux_data: AuxDataTables,
}

impl Module {
    pub fn new(name: impl Into<String>) -> Self {
        Self::with_uuid(Uuid::new(), name)
    }

    pub fn with_uuid(uuid: Uuid, name: impl Into<String>) -> Self {
        Module {
            uuid,
            name: name.into(),
            isa: Isa::Undefined,
            file_format: FileFormat::Undefined,
            preferred_base: None,
            sections: Vec::new(),
            symbols: Vec::new(),
            proxy_blocks: Vec::new(),
            aux_data: AuxDataTables::default(),
        }
    }

    pub fn intervals(&self) -> impl Iterator<Item = &ByteInterval> {
        self.sections.iter().flat_map(|s| s.intervals.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub uuid: Uuid,
    pub name: String,
    pub flags: BTreeSet<SectionFlag>,
    pub intervals: Vec<ByteInterval>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Self::with_uuid(Uuid::new(), name)
    }

    pub fn with_uuid(uuid: Uuid, name: impl Into<String>) -> Self {
        Section { uuid, name: name.into(), flags: BTreeSet::new(), intervals: Vec::new() }
    }

    pub fn with_flags(mut self, flags: impl IntoIterator<Item = SectionFlag>) -> Self {
        self.flags.extend(flags);
        self
    }

    pub fn is_loaded(&self) -> bool {
        self.flags.contains(&SectionFlag::Loaded)
    }
}

/// A contiguous run of raw bytes, optionally pinned to an address.
///
/// `contents` may be shorter than `size`; the missing tail reads as zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteInterval {
    pub uuid: Uuid,
    pub address: Option<u64>,
    pub size: u64,
    pub contents: Vec<u8>,
    pub blocks: Vec<BlockEntry>,
    pub sym_exprs: BTreeMap<u64, SymbolicExpression>,
}

impl ByteInterval {
    /// An uninitialized interval of `size` bytes.
    pub fn new(size: u64) -> Self {
        Self::with_uuid(Uuid::new(), size)
    }

    pub fn with_uuid(uuid: Uuid, size: u64) -> Self {
        ByteInterval {
            uuid,
            address: None,
            size,
            contents: Vec::new(),
            blocks: Vec::new(),
            sym_exprs: BTreeMap::new(),
        }
    }

    /// An interval whose size is exactly the given contents.
    pub fn from_contents(contents: impl Into<Vec<u8>>) -> Self {
        let contents = contents.into();
        let mut bi = Self::new(contents.len() as u64);
        bi.contents = contents;
        bi
    }

    pub fn at_address(mut self, address: u64) -> Self {
        self.address = Some(address);
        self
    }

    /// Reads `len` bytes at `offset`, zero-filling anything past `contents`.
    /// The caller is responsible for keeping the range inside `size`.
    pub fn read(&self, offset: u64, len: u64) -> Vec<u8> {
        let mut out = vec![0u8; len as usize];
        let clen = self.contents.len() as u64;
        if offset < clen {
            let end = offset.saturating_add(len).min(clen);
            out[..(end - offset) as usize]
                .copy_from_slice(&self.contents[offset as usize..end as usize]);
        }
        out
    }

    /// Overwrites bytes at `offset`, growing `contents` with zeros as needed.
    pub fn write(&mut self, offset: u64, bytes: &[u8]) {
        let end = offset as usize + bytes.len();
        if self.contents.len() < end {
            self.contents.resize(end, 0);
        }
        self.contents[offset as usize..end].copy_from_slice(bytes);
    }

    pub fn find_block(&self, uuid: Uuid) -> Option<&BlockEntry> {
        self.blocks.iter().find(|e| e.block.uuid() == uuid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockEntry {
    pub offset: u64,
    pub block: Block,
}

impl BlockEntry {
    /// One past the last byte, or `None` on overflow.
    pub fn end(&self) -> Option<u64> {
        self.offset.checked_add(self.block.size())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeBlock {
    pub uuid: Uuid,
    pub size: u64,
}

impl CodeBlock {
    pub fn new(size: u64) -> Self {
        CodeBlock { uuid: Uuid::new(), size }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DataBlock {
    pub uuid: Uuid,
    pub size: u64,
}

impl DataBlock {
    pub fn new(size: u64) -> Self {
        DataBlock { uuid: Uuid::new(), size }
    }
}

/// A byte-carrying block; the variant order is also its wire tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Code(CodeBlock),
    Data(DataBlock),
}

impl Block {
    pub fn uuid(&self) -> Uuid {
        match self {
            Block::Code(b) => b.uuid,
            Block::Data(b) => b.uuid,
        }
    }

    pub fn size(&self) -> u64 {
        match self {
            Block::Code(b) => b.size,
            Block::Data(b) => b.size,
        }
    }

    pub fn set_size(&mut self, size: u64) {
        match self {
            Block::Code(b) => b.size = size,
            Block::Data(b) => b.size = size,
        }
    }

    pub fn set_uuid(&mut self, uuid: Uuid) {
        match self {
            Block::Code(b) => b.uuid = uuid,
            Block::Data(b) => b.uuid = uuid,
        }
    }

    pub fn is_code(&self) -> bool {
        matches!(self, Block::Code(_))
    }
}

impl From<CodeBlock> for Block {
    fn from(b: CodeBlock) -> Self {
        Block::Code(b)
    }
}

impl From<DataBlock> for Block {
    fn from(b: DataBlock) -> Self {
        Block::Data(b)
    }
}

/// A CFG node with no bytes, standing in for code outside the IR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProxyBlock {
    pub uuid: Uuid,
}

impl ProxyBlock {
    pub fn new() -> Self {
        ProxyBlock { uuid: Uuid::new() }
    }
}

impl Default for ProxyBlock {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolPayload {
    Value(i64),
    /// A code, data or proxy block.
    Referent(Uuid),
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    pub uuid: Uuid,
    pub name: String,
    pub payload: SymbolPayload,
}

impl Symbol {
    pub fn new(name: impl Into<String>, payload: SymbolPayload) -> Self {
        Symbol { uuid: Uuid::new(), name: name.into(), payload }
    }
}

/// Address-dependent formula anchored at an interval offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolicExpression {
    /// `addr(symbol) + offset`
    SymAddrConst { symbol: Uuid, offset: i64 },
    /// `(addr(minuend) - addr(subtrahend)) / scale + offset`, truncating.
    SymAddrAddr { minuend: Uuid, subtrahend: Uuid, scale: i64, offset: i64 },
}

impl SymbolicExpression {
    pub fn symbols(&self) -> impl Iterator<Item = Uuid> {
        let (a, b) = match *self {
            SymbolicExpression::SymAddrConst { symbol, .. } => (symbol, None),
            SymbolicExpression::SymAddrAddr { minuend, subtrahend, .. } => {
                (minuend, Some(subtrahend))
            }
        };
        std::iter::once(a).chain(b)
    }
}

/// A position relative to a block or interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Offset {
    pub element: Uuid,
    pub displacement: u64,
}

impl Offset {
    pub fn new(element: Uuid, displacement: u64) -> Self {
        Offset { element, displacement }
    }
}
