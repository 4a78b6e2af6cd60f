//! AuxData: schema-tagged side tables attached to the IR or a module.
//!
//! Each entry stores its type specifier as canonical text next to the
//! encoded bytes, so tables with labels this crate knows nothing about
//! survive load/save untouched.

mod functions;
mod typespec;
mod value;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::codec::ReadError;
use crate::uuid::Uuid;

pub use functions::{forward_symbol, get_functions, make_function, make_function_with_uuid, Function};
pub use typespec::{TypeSpec, TypeSpecError};
pub use value::{decode_value, encode_value, AuxValue, Strictness, Value};

pub const FUNCTION_BLOCKS: &str = "functionBlocks";
pub const FUNCTION_ENTRIES: &str = "functionEntries";
pub const FUNCTION_NAMES: &str = "functionNames";
pub const TYPES: &str = "types";
pub const ALIGNMENT: &str = "alignment";
pub const COMMENTS: &str = "comments";
pub const SYMBOL_FORWARDING: &str = "symbolForwarding";
pub const PADDING: &str = "padding";

/// The sanctioned labels and their fixed schemas.
pub const SANCTIONED: [(&str, &str); 8] = [
    (FUNCTION_BLOCKS, "mapping<UUID,set<UUID>>"),
    (FUNCTION_ENTRIES, "mapping<UUID,set<UUID>>"),
    (FUNCTION_NAMES, "mapping<UUID,UUID>"),
    (TYPES, "mapping<UUID,string>"),
    (ALIGNMENT, "mapping<UUID,uint64>"),
    (COMMENTS, "mapping<Offset,string>"),
    (SYMBOL_FORWARDING, "mapping<UUID,UUID>"),
    (PADDING, "mapping<Offset,uint64>"),
];

pub fn sanctioned_spec_text(label: &str) -> Option<&'static str> {
    SANCTIONED.iter().find(|(l, _)| *l == label).map(|(_, s)| *s)
}

pub fn sanctioned_spec(label: &str) -> Option<TypeSpec> {
    sanctioned_spec_text(label).map(|s| TypeSpec::parse(s).expect("registry specs parse"))
}

pub fn is_sanctioned(label: &str) -> bool {
    sanctioned_spec_text(label).is_some()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuxDataError {
    #[error(transparent)]
    Syntax(#[from] TypeSpecError),
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error("value of kind {found} does not match type {expected}")]
    ShapeMismatch { expected: String, found: String },
    #[error("set or mapping not in canonical order at byte {position}")]
    UnsortedCanonicalForm { position: usize },
    #[error("duplicate set element or mapping key at byte {position}")]
    DuplicateKey { position: usize },
    #[error("{position} trailing bytes after value")]
    TrailingBytes { position: usize },
    #[error("table {label:?} has schema {expected}, not {found}")]
    SchemaMismatch { label: String, expected: String, found: String },
    #[error("function entries are not a subset of its blocks")]
    EntriesNotSubset,
    #[error("{0} does not resolve to an entity of the required kind")]
    DanglingReference(Uuid),
    #[error("symbol forwarding cycle through {0}")]
    ForwardingCycle(Uuid),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AuxDataEntry {
    /// Type specifier text as stored; canonical when written by this crate.
    pub type_spec: String,
    pub bytes: Vec<u8>,
}

/// Label-keyed AuxData tables of one owner.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuxDataTables(BTreeMap<String, AuxDataEntry>);

impl AuxDataTables {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &AuxDataEntry)> {
        self.0.iter()
    }

    pub fn entry(&self, label: &str) -> Option<&AuxDataEntry> {
        self.0.get(label)
    }

    pub fn entry_mut(&mut self, label: &str) -> Option<&mut AuxDataEntry> {
        self.0.get_mut(label)
    }

    /// Stores an entry verbatim, with no schema or decode checks.
    pub fn insert_raw(&mut self, label: impl Into<String>, entry: AuxDataEntry) -> Option<AuxDataEntry> {
        self.0.insert(label.into(), entry)
    }

    pub fn remove(&mut self, label: &str) -> Option<AuxDataEntry> {
        self.0.remove(label)
    }

    fn check_schema(&self, label: &str, spec: &TypeSpec) -> Result<(), AuxDataError> {
        if let Some(expected) = sanctioned_spec_text(label) {
            let found = spec.to_string();
            if found != expected {
                return Err(AuxDataError::SchemaMismatch {
                    label: label.to_string(),
                    expected: expected.to_string(),
                    found,
                });
            }
        }
        Ok(())
    }

    /// Decodes the table stored under `label`, if any.
    pub fn get_table(&self, label: &str, spec: &TypeSpec) -> Result<Option<Value>, AuxDataError> {
        self.check_schema(label, spec)?;
        let Some(entry) = self.0.get(label) else {
            return Ok(None);
        };
        let stored = TypeSpec::parse(&entry.type_spec)?;
        if &stored != spec {
            return Err(AuxDataError::SchemaMismatch {
                label: label.to_string(),
                expected: stored.to_string(),
                found: spec.to_string(),
            });
        }
        decode_value(spec, &entry.bytes, Strictness::Strict).map(Some)
    }

    /// Stores `value` canonically encoded under `label`.
    pub fn set_table(&mut self, label: &str, spec: &TypeSpec, value: &Value) -> Result<(), AuxDataError> {
        self.check_schema(label, spec)?;
        let bytes = encode_value(spec, value)?;
        self.0.insert(label.to_string(), AuxDataEntry { type_spec: spec.to_string(), bytes });
        Ok(())
    }

    pub fn get<T: AuxValue>(&self, label: &str) -> Result<Option<T>, AuxDataError> {
        let spec = T::type_spec();
        match self.get_table(label, &spec)? {
            None => Ok(None),
            Some(v) => T::from_value(v)
                .map(Some)
                .ok_or_else(|| AuxDataError::ShapeMismatch { expected: spec.to_string(), found: "value".into() }),
        }
    }

    pub fn set<T: AuxValue>(&mut self, label: &str, value: &T) -> Result<(), AuxDataError> {
        self.set_table(label, &T::type_spec(), &value.to_value())
    }
}
