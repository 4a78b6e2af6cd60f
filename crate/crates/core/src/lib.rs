//! In-memory model, canonical serialization and rewriting for a
//! binary-rewriting intermediate representation.
//!
//! The IR is a tree (`Ir` → `Module` → `Section` → `ByteInterval` →
//! blocks) plus an IR-wide interprocedural control-flow graph whose
//! vertices are code and proxy blocks. Everything is identified by UUID.

pub mod auxdata;
pub mod cfg;
pub(crate) mod codec;
pub mod ir;
pub mod model;
pub mod rewrite;
pub mod uuid;
pub mod validate;
pub mod wire;

pub use auxdata::{AuxDataEntry, AuxDataError, AuxDataTables, TypeSpec, Value};
pub use cfg::{Cfg, CfgError, Edge, EdgeKind, EdgeLabel};
pub use codec::ReadError;
pub use ir::{BlockPlacement, Ir, IrError, NodeKind, NodeRef};
pub use model::{
    Block, BlockEntry, ByteInterval, CodeBlock, DataBlock, FileFormat, Isa, Module, Offset, ProxyBlock, Section,
    SectionFlag, Symbol, SymbolPayload, SymbolicExpression,
};
pub use uuid::Uuid;
pub use validate::{validate, Violation, ViolationCode, ViolationLocation};
pub use wire::{canonicalize, load, load_unchecked, save, save_unchecked, WireError};
pub use rewrite::{
    build_image, eval_symexpr, insert_bytes, layout, move_block, split_interval, AddressAssignment, EncodingDirective,
    Endianness, Image, RewriteError,
};
