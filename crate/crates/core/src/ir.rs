use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use thiserror::Error;

use crate::auxdata::AuxDataTables;
use crate::cfg::{Cfg, CfgError, Edge, EdgeLabel};
use crate::model::{
    Block, BlockEntry, ByteInterval, CodeBlock, DataBlock, Module, ProxyBlock, Section, Symbol,
    SymbolicExpression,
};
use crate::uuid::Uuid;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("no entity with uuid {0}")]
    UnknownUuid(Uuid),
    #[error("{uuid} is a {found}, expected {expected}")]
    WrongKind { uuid: Uuid, expected: &'static str, found: &'static str },
    #[error("proxy block {0} has no bytes")]
    ProxyHasNoBytes(Uuid),
    #[error("range {offset}+{len} exceeds interval size {size}")]
    OutOfRange { offset: u64, len: u64, size: u64 },
    #[error("uuid {0} is already in use")]
    DuplicateUuid(Uuid),
    #[error(transparent)]
    Cfg(#[from] CfgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Ir,
    Module,
    Section,
    ByteInterval,
    CodeBlock,
    DataBlock,
    ProxyBlock,
    Symbol,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Ir => "IR",
            NodeKind::Module => "Module",
            NodeKind::Section => "Section",
            NodeKind::ByteInterval => "ByteInterval",
            NodeKind::CodeBlock => "CodeBlock",
            NodeKind::DataBlock => "DataBlock",
            NodeKind::ProxyBlock => "ProxyBlock",
            NodeKind::Symbol => "Symbol",
        }
    }

    pub fn is_cfg_node(self) -> bool {
        matches!(self, NodeKind::CodeBlock | NodeKind::ProxyBlock)
    }

    pub fn is_block(self) -> bool {
        matches!(self, NodeKind::CodeBlock | NodeKind::DataBlock | NodeKind::ProxyBlock)
    }
}

/// Borrowed view of any entity found by UUID.
#[derive(Debug, Clone, Copy)]
pub enum NodeRef<'a> {
    Ir(&'a Ir),
    Module(&'a Module),
    Section(&'a Section),
    ByteInterval(&'a ByteInterval),
    CodeBlock(&'a CodeBlock),
    DataBlock(&'a DataBlock),
    ProxyBlock(&'a ProxyBlock),
    Symbol(&'a Symbol),
}

impl NodeRef<'_> {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeRef::Ir(_) => NodeKind::Ir,
            NodeRef::Module(_) => NodeKind::Module,
            NodeRef::Section(_) => NodeKind::Section,
            NodeRef::ByteInterval(_) => NodeKind::ByteInterval,
            NodeRef::CodeBlock(_) => NodeKind::CodeBlock,
            NodeRef::DataBlock(_) => NodeKind::DataBlock,
            NodeRef::ProxyBlock(_) => NodeKind::ProxyBlock,
            NodeRef::Symbol(_) => NodeKind::Symbol,
        }
    }

    pub fn uuid(&self) -> Uuid {
        match self {
            NodeRef::Ir(x) => x.uuid(),
            NodeRef::Module(x) => x.uuid,
            NodeRef::Section(x) => x.uuid,
            NodeRef::ByteInterval(x) => x.uuid,
            NodeRef::CodeBlock(x) => x.uuid,
            NodeRef::DataBlock(x) => x.uuid,
            NodeRef::ProxyBlock(x) => x.uuid,
            NodeRef::Symbol(x) => x.uuid,
        }
    }
}

/// Where a byte-carrying block lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlacement {
    pub module: Uuid,
    pub section: Uuid,
    pub interval: Uuid,
    pub offset: u64,
}

/// Positional path to an entity. Indices are into the owning vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Loc {
    Ir,
    Module(usize),
    Section(usize, usize),
    Interval(usize, usize, usize),
    Block(usize, usize, usize, usize),
    Proxy(usize, usize),
    Symbol(usize, usize),
}

/// Root of the IR: modules, the single IPCFG and IR-level AuxData.
///
/// Entities are looked up by UUID through an index that is built lazily and
/// kept up to date by the `add_*` methods. Handing out `&mut` access to the
/// module tree ([`Ir::modules_mut`] and friends) drops the index; the next
/// lookup rebuilds it.
#[derive(Debug, Clone)]
pub struct Ir {
    uuid: Uuid,
    version: u32,
    modules: Vec<Module>,
    cfg: Cfg,
    aux_data: AuxDataTables,
    index: OnceLock<HashMap<Uuid, Loc>>,
}

impl PartialEq for Ir {
    fn eq(&self, other: &Self) -> bool {
        self.uuid == other.uuid
            && self.version == other.version
            && self.modules == other.modules
            && self.cfg == other.cfg
            && self.aux_data == other.aux_data
    }
}

impl Eq for Ir {}

impl Ir {
    pub fn new(version: u32) -> Self {
        Self::with_uuid(Uuid::new(), version)
    }

    pub fn with_uuid(uuid: Uuid, version: u32) -> Self {
        Ir {
            uuid,
            version,
            modules: Vec::new(),
            cfg: Cfg::new(),
            aux_data: AuxDataTables::new(),
            index: OnceLock::new(),
        }
    }

    pub(crate) fn from_parts(uuid: Uuid, version: u32, modules: Vec<Module>, cfg: Cfg, aux_data: AuxDataTables) -> Self {
        Ir { uuid, version, modules, cfg, aux_data, index: OnceLock::new() }
    }

    pub fn uuid(&self) -> Uuid {
        self.uuid
    }

    pub fn set_uuid(&mut self, uuid: Uuid) {
        self.uuid = uuid;
        self.index = OnceLock::new();
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn set_version(&mut self, version: u32) {
        self.version = version;
    }

    pub fn modules(&self) -> &[Module] {
        &self.modules
    }

    /// Raw access to the module tree. Invalidates the UUID index.
    pub fn modules_mut(&mut self) -> &mut Vec<Module> {
        self.index = OnceLock::new();
        &mut self.modules
    }

    pub fn cfg(&self) -> &Cfg {
        &self.cfg
    }

    /// Raw graph access; endpoint typing is not checked on this path.
    pub fn cfg_mut(&mut self) -> &mut Cfg {
        &mut self.cfg
    }

    pub fn aux_data(&self) -> &AuxDataTables {
        &self.aux_data
    }

    pub fn aux_data_mut(&mut self) -> &mut AuxDataTables {
        &mut self.aux_data
    }

    fn index(&self) -> &HashMap<Uuid, Loc> {
        self.index.get_or_init(|| {
            let mut idx = HashMap::new();
            self.walk(|id, loc| {
                idx.entry(id).or_insert(loc);
            });
            idx
        })
    }

    /// Visits every entity UUID with its location, in tree order.
    pub(crate) fn walk(&self, mut f: impl FnMut(Uuid, Loc)) {
        f(self.uuid, Loc::Ir);
        for (m, module) in self.modules.iter().enumerate() {
            f(module.uuid, Loc::Module(m));
            for (s, section) in module.sections.iter().enumerate() {
                f(section.uuid, Loc::Section(m, s));
                for (i, bi) in section.intervals.iter().enumerate() {
                    f(bi.uuid, Loc::Interval(m, s, i));
                    for (b, entry) in bi.blocks.iter().enumerate() {
                        f(entry.block.uuid(), Loc::Block(m, s, i, b));
                    }
                }
            }
            for (p, proxy) in module.proxy_blocks.iter().enumerate() {
                f(proxy.uuid, Loc::Proxy(m, p));
            }
            for (y, sym) in module.symbols.iter().enumerate() {
                f(sym.uuid, Loc::Symbol(m, y));
            }
        }
    }

    pub(crate) fn locate(&self, id: Uuid) -> Option<Loc> {
        self.index().get(&id).copied()
    }

    fn index_insert(&mut self, id: Uuid, loc: Loc) {
        if let Some(idx) = self.index.get_mut() {
            idx.insert(id, loc);
        }
    }

    fn resolve(&self, loc: Loc) -> NodeRef<'_> {
        let ms = &self.modules;
        match loc {
            Loc::Ir => NodeRef::Ir(self),
            Loc::Module(m) => NodeRef::Module(&ms[m]),
            Loc::Section(m, s) => NodeRef::Section(&ms[m].sections[s]),
            Loc::Interval(m, s, i) => NodeRef::ByteInterval(&ms[m].sections[s].intervals[i]),
            Loc::Block(m, s, i, b) => match &ms[m].sections[s].intervals[i].blocks[b].block {
                Block::Code(c) => NodeRef::CodeBlock(c),
                Block::Data(d) => NodeRef::DataBlock(d),
            },
            Loc::Proxy(m, p) => NodeRef::ProxyBlock(&ms[m].proxy_blocks[p]),
            Loc::Symbol(m, y) => NodeRef::Symbol(&ms[m].symbols[y]),
        }
    }

    /// The entity carrying `id`. With duplicate UUIDs (an invalid IR) the
    /// first in tree order wins.
    pub fn find_node(&self, id: Uuid) -> Option<NodeRef<'_>> {
        self.locate(id).map(|loc| self.resolve(loc))
    }

    pub fn kind_of(&self, id: Uuid) -> Option<NodeKind> {
        self.find_node(id).map(|n| n.kind())
    }

    pub fn module(&self, id: Uuid) -> Option<&Module> {
        match self.find_node(id) {
            Some(NodeRef::Module(m)) => Some(m),
            _ => None,
        }
    }

    pub fn section(&self, id: Uuid) -> Option<&Section> {
        match self.find_node(id) {
            Some(NodeRef::Section(s)) => Some(s),
            _ => None,
        }
    }

    pub fn interval(&self, id: Uuid) -> Option<&ByteInterval> {
        match self.find_node(id) {
            Some(NodeRef::ByteInterval(b)) => Some(b),
            _ => None,
        }
    }

    pub fn symbol(&self, id: Uuid) -> Option<&Symbol> {
        match self.find_node(id) {
            Some(NodeRef::Symbol(s)) => Some(s),
            _ => None,
        }
    }

    /// The code or data block entry (offset and block) for `id`.
    pub fn block_entry(&self, id: Uuid) -> Option<&BlockEntry> {
        match self.locate(id)? {
            Loc::Block(m, s, i, b) => Some(&self.modules[m].sections[s].intervals[i].blocks[b]),
            _ => None,
        }
    }

    pub fn block_placement(&self, id: Uuid) -> Option<BlockPlacement> {
        match self.locate(id)? {
            Loc::Block(m, s, i, b) => {
                let module = &self.modules[m];
                let section = &module.sections[s];
                let interval = &section.intervals[i];
                Some(BlockPlacement {
                    module: module.uuid,
                    section: section.uuid,
                    interval: interval.uuid,
                    offset: interval.blocks[b].offset,
                })
            }
            _ => None,
        }
    }

    /// Module owning `id`, for any entity below a module.
    pub fn owning_module(&self, id: Uuid) -> Option<&Module> {
        let m = match self.locate(id)? {
            Loc::Ir => return None,
            Loc::Module(m)
            | Loc::Section(m, _)
            | Loc::Interval(m, _, _)
            | Loc::Block(m, ..)
            | Loc::Proxy(m, _)
            | Loc::Symbol(m, _) => m,
        };
        Some(&self.modules[m])
    }

    pub(crate) fn module_index(&self, id: Uuid) -> Result<usize, IrError> {
        match self.locate(id) {
            Some(Loc::Module(m)) => Ok(m),
            other => Err(self.kind_error(id, other, "Module")),
        }
    }

    pub(crate) fn interval_loc(&self, id: Uuid) -> Result<(usize, usize, usize), IrError> {
        match self.locate(id) {
            Some(Loc::Interval(m, s, i)) => Ok((m, s, i)),
            other => Err(self.kind_error(id, other, "ByteInterval")),
        }
    }

    pub(crate) fn kind_error(&self, id: Uuid, loc: Option<Loc>, expected: &'static str) -> IrError {
        match loc {
            None => IrError::UnknownUuid(id),
            Some(loc) => IrError::WrongKind { uuid: id, expected, found: self.resolve(loc).kind().name() },
        }
    }

    /// Mutable module access that keeps the index (AuxData edits and the like
    /// must not add or remove entities through this).
    pub fn module_aux_data_mut(&mut self, module: Uuid) -> Result<&mut AuxDataTables, IrError> {
        let m = self.module_index(module)?;
        Ok(&mut self.modules[m].aux_data)
    }

    pub fn interval_mut(&mut self, id: Uuid) -> Result<&mut ByteInterval, IrError> {
        let (m, s, i) = self.interval_loc(id)?;
        self.index = OnceLock::new();
        Ok(&mut self.modules[m].sections[s].intervals[i])
    }

    fn check_fresh(&self, ids: impl IntoIterator<Item = Uuid>) -> Result<(), IrError> {
        let mut seen = HashSet::new();
        for id in ids {
            if self.locate(id).is_some() || !seen.insert(id) {
                return Err(IrError::DuplicateUuid(id));
            }
        }
        Ok(())
    }

    fn register_cfg_nodes_of_section(cfg: &mut Cfg, section: &Section) {
        for bi in &section.intervals {
            for e in &bi.blocks {
                if e.block.is_code() {
                    cfg.add_vertex(e.block.uuid());
                }
            }
        }
    }

    /// Appends a module (with whatever it already contains).
    pub fn add_module(&mut self, module: Module) -> Result<Uuid, IrError> {
        let mut ids = vec![module.uuid];
        collect_module_ids(&module, &mut ids);
        self.check_fresh(ids)?;
        for section in &module.sections {
            Self::register_cfg_nodes_of_section(&mut self.cfg, section);
        }
        for p in &module.proxy_blocks {
            self.cfg.add_vertex(p.uuid);
        }
        let id = module.uuid;
        self.modules.push(module);
        self.index = OnceLock::new();
        Ok(id)
    }

    pub fn add_section(&mut self, module: Uuid, section: Section) -> Result<Uuid, IrError> {
        let m = self.module_index(module)?;
        let mut ids = vec![section.uuid];
        collect_section_ids(&section, &mut ids);
        self.check_fresh(ids)?;
        Self::register_cfg_nodes_of_section(&mut self.cfg, &section);
        let id = section.uuid;
        self.modules[m].sections.push(section);
        self.index = OnceLock::new();
        Ok(id)
    }

    pub fn add_interval(&mut self, section: Uuid, interval: ByteInterval) -> Result<Uuid, IrError> {
        let (m, s) = match self.locate(section) {
            Some(Loc::Section(m, s)) => (m, s),
            other => return Err(self.kind_error(section, other, "Section")),
        };
        let mut ids = vec![interval.uuid];
        ids.extend(interval.blocks.iter().map(|e| e.block.uuid()));
        self.check_fresh(ids)?;
        for e in &interval.blocks {
            if e.block.is_code() {
                self.cfg.add_vertex(e.block.uuid());
            }
        }
        let id = interval.uuid;
        let intervals = &mut self.modules[m].sections[s].intervals;
        intervals.push(interval);
        let i = intervals.len() - 1;
        self.index_insert(id, Loc::Interval(m, s, i));
        let blocks: Vec<Uuid> = self.modules[m].sections[s].intervals[i].blocks.iter().map(|e| e.block.uuid()).collect();
        for (b, bid) in blocks.into_iter().enumerate() {
            self.index_insert(bid, Loc::Block(m, s, i, b));
        }
        Ok(id)
    }

    /// Places a block at `offset`. Overlap with other blocks is allowed.
    pub fn add_block(&mut self, interval: Uuid, offset: u64, block: impl Into<Block>) -> Result<Uuid, IrError> {
        let block = block.into();
        let (m, s, i) = self.interval_loc(interval)?;
        let size = self.modules[m].sections[s].intervals[i].size;
        if offset.checked_add(block.size()).map_or(true, |end| end > size) {
            return Err(IrError::OutOfRange { offset, len: block.size(), size });
        }
        self.check_fresh([block.uuid()])?;
        let blocks = &mut self.modules[m].sections[s].intervals[i].blocks;
        blocks.push(BlockEntry { offset, block });
        let b = blocks.len() - 1;
        let id = block.uuid();
        self.index_insert(id, Loc::Block(m, s, i, b));
        if block.is_code() {
            self.cfg.add_vertex(id);
        }
        Ok(id)
    }

    pub fn add_code_block(&mut self, interval: Uuid, offset: u64, size: u64) -> Result<Uuid, IrError> {
        self.add_block(interval, offset, CodeBlock::new(size))
    }

    pub fn add_data_block(&mut self, interval: Uuid, offset: u64, size: u64) -> Result<Uuid, IrError> {
        self.add_block(interval, offset, DataBlock::new(size))
    }

    /// Removes a code or data block together with its CFG vertex and edges.
    pub fn remove_block(&mut self, id: Uuid) -> Result<BlockEntry, IrError> {
        let (m, s, i, b) = match self.locate(id) {
            Some(Loc::Block(m, s, i, b)) => (m, s, i, b),
            other => return Err(self.kind_error(id, other, "CodeBlock or DataBlock")),
        };
        let entry = self.modules[m].sections[s].intervals[i].blocks.remove(b);
        self.cfg.remove_vertex(id);
        self.index = OnceLock::new();
        Ok(entry)
    }

    pub fn add_proxy_block(&mut self, module: Uuid, proxy: ProxyBlock) -> Result<Uuid, IrError> {
        let m = self.module_index(module)?;
        self.check_fresh([proxy.uuid])?;
        let proxies = &mut self.modules[m].proxy_blocks;
        proxies.push(proxy);
        let p = proxies.len() - 1;
        self.index_insert(proxy.uuid, Loc::Proxy(m, p));
        self.cfg.add_vertex(proxy.uuid);
        Ok(proxy.uuid)
    }

    pub fn add_symbol(&mut self, module: Uuid, symbol: Symbol) -> Result<Uuid, IrError> {
        let m = self.module_index(module)?;
        self.check_fresh([symbol.uuid])?;
        let id = symbol.uuid;
        let symbols = &mut self.modules[m].symbols;
        symbols.push(symbol);
        let y = symbols.len() - 1;
        self.index_insert(id, Loc::Symbol(m, y));
        Ok(id)
    }

    /// Attaches `expr` at an interval offset, returning any expression it
    /// replaced.
    pub fn set_sym_expr(
        &mut self,
        interval: Uuid,
        offset: u64,
        expr: SymbolicExpression,
    ) -> Result<Option<SymbolicExpression>, IrError> {
        let (m, s, i) = self.interval_loc(interval)?;
        let bi = &mut self.modules[m].sections[s].intervals[i];
        if offset >= bi.size {
            return Err(IrError::OutOfRange { offset, len: 1, size: bi.size });
        }
        Ok(bi.sym_exprs.insert(offset, expr))
    }

    /// Adds a CFG edge after checking both endpoints are code or proxy
    /// blocks of this IR.
    pub fn add_edge(&mut self, source: Uuid, target: Uuid, label: EdgeLabel) -> Result<Edge, IrError> {
        for end in [source, target] {
            if !self.kind_of(end).is_some_and(NodeKind::is_cfg_node) {
                return Err(CfgError::EndpointNotCodeOrProxy(end).into());
            }
        }
        Ok(self.cfg.add_edge(source, target, label)?)
    }

    /// The bytes covered by a code or data block, zero-filled past the
    /// interval's initialized contents.
    pub fn block_bytes(&self, id: Uuid) -> Result<Vec<u8>, IrError> {
        match self.locate(id) {
            Some(Loc::Block(m, s, i, b)) => {
                let bi = &self.modules[m].sections[s].intervals[i];
                let e = &bi.blocks[b];
                Ok(bi.read(e.offset, e.block.size()))
            }
            Some(Loc::Proxy(..)) => Err(IrError::ProxyHasNoBytes(id)),
            other => Err(self.kind_error(id, other, "CodeBlock or DataBlock")),
        }
    }

    /// Interval address plus block offset, when the interval is placed.
    pub fn block_address(&self, id: Uuid) -> Result<Option<u64>, IrError> {
        match self.locate(id) {
            Some(Loc::Block(m, s, i, b)) => {
                let bi = &self.modules[m].sections[s].intervals[i];
                Ok(bi.address.map(|a| a.wrapping_add(bi.blocks[b].offset)))
            }
            Some(Loc::Proxy(..)) => Ok(None),
            other => Err(self.kind_error(id, other, "block")),
        }
    }

    /// Every entity UUID in tree order, duplicates included.
    pub fn all_uuids(&self) -> Vec<(Uuid, NodeKind)> {
        let mut out = Vec::new();
        self.walk(|id, loc| out.push((id, self.resolve(loc).kind())));
        out
    }
}

fn collect_section_ids(section: &Section, ids: &mut Vec<Uuid>) {
    for bi in &section.intervals {
        ids.push(bi.uuid);
        ids.extend(bi.blocks.iter().map(|e| e.block.uuid()));
    }
}

fn collect_module_ids(module: &Module, ids: &mut Vec<Uuid>) {
    for s in &module.sections {
        ids.push(s.uuid);
        collect_section_ids(s, ids);
    }
    ids.extend(module.proxy_blocks.iter().map(|p| p.uuid));
    ids.extend(module.symbols.iter().map(|s| s.uuid));
}
