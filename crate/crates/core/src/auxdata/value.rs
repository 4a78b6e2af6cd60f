//! Structured AuxData values and their canonical byte encoding.
//!
//! | spec        | encoding                                                  |
//! |-------------|-----------------------------------------------------------|
//! | `UUID`      | 16 raw bytes                                              |
//! | `uint64`    | 8 bytes little-endian                                     |
//! | `int64`     | 8 bytes little-endian two's complement                    |
//! | `string`    | u64 byte length, then UTF-8                               |
//! | `Offset`    | UUID, then u64 displacement                               |
//! | `sequence`  | u64 count, then elements in order                         |
//! | `set`       | u64 count, then elements sorted by encoded bytes          |
//! | `mapping`   | u64 count, then key/value pairs sorted by encoded key     |
//! | `tuple`     | elements back to back, no count                           |

use std::collections::{BTreeMap, BTreeSet};

use crate::codec::{put_bytes, put_u64, put_uuid, Reader};
use crate::model::Offset;
use crate::uuid::Uuid;

use super::{AuxDataError, TypeSpec};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Uuid(Uuid),
    U64(u64),
    I64(i64),
    String(String),
    Offset(Offset),
    Sequence(Vec<Value>),
    Set(BTreeSet<Value>),
    Mapping(BTreeMap<Value, Value>),
    Tuple(Vec<Value>),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Uuid(_) => "UUID",
            Value::U64(_) => "uint64",
            Value::I64(_) => "int64",
            Value::String(_) => "string",
            Value::Offset(_) => "Offset",
            Value::Sequence(_) => "sequence",
            Value::Set(_) => "set",
            Value::Mapping(_) => "mapping",
            Value::Tuple(_) => "tuple",
        }
    }
}

/// How much canonical-form checking `decode_value` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// Set elements and mapping keys must be strictly ascending.
    Strict,
    /// Any order is accepted; duplicates are still rejected.
    Lax,
}

pub fn encode_value(spec: &TypeSpec, value: &Value) -> Result<Vec<u8>, AuxDataError> {
    let mut out = Vec::new();
    encode_into(spec, value, &mut out)?;
    Ok(out)
}

fn mismatch(spec: &TypeSpec, value: &Value) -> AuxDataError {
    AuxDataError::ShapeMismatch { expected: spec.to_string(), found: value.kind().to_string() }
}

fn encode_into(spec: &TypeSpec, value: &Value, out: &mut Vec<u8>) -> Result<(), AuxDataError> {
    match (spec, value) {
        (TypeSpec::Uuid, Value::Uuid(u)) => put_uuid(out, u),
        (TypeSpec::Uint64, Value::U64(v)) => put_u64(out, *v),
        (TypeSpec::Int64, Value::I64(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (TypeSpec::String, Value::String(s)) => put_bytes(out, s.as_bytes()),
        (TypeSpec::Offset, Value::Offset(o)) => {
            put_uuid(out, &o.element);
            put_u64(out, o.displacement);
        }
        (TypeSpec::Sequence(t), Value::Sequence(items)) => {
            put_u64(out, items.len() as u64);
            for item in items {
                encode_into(t, item, out)?;
            }
        }
        (TypeSpec::Set(t), Value::Set(items)) => {
            let mut encoded = items
                .iter()
                .map(|v| encode_value(t, v))
                .collect::<Result<Vec<_>, _>>()?;
            encoded.sort();
            put_u64(out, encoded.len() as u64);
            encoded.iter().for_each(|e| out.extend_from_slice(e));
        }
        (TypeSpec::Mapping(k, v), Value::Mapping(entries)) => {
            let mut encoded = entries
                .iter()
                .map(|(key, val)| Ok((encode_value(k, key)?, encode_value(v, val)?)))
                .collect::<Result<Vec<_>, AuxDataError>>()?;
            encoded.sort_by(|a, b| a.0.cmp(&b.0));
            put_u64(out, encoded.len() as u64);
            for (key, val) in encoded {
                out.extend_from_slice(&key);
                out.extend_from_slice(&val);
            }
        }
        (TypeSpec::Tuple(ts), Value::Tuple(items)) if ts.len() == items.len() => {
            for (t, item) in ts.iter().zip(items) {
                encode_into(t, item, out)?;
            }
        }
        _ => return Err(mismatch(spec, value)),
    }
    Ok(())
}

/// Decodes a complete payload; trailing bytes are an error.
pub fn decode_value(spec: &TypeSpec, bytes: &[u8], strictness: Strictness) -> Result<Value, AuxDataError> {
    let mut r = Reader::new(bytes);
    let v = decode_from(spec, &mut r, strictness)?;
    if !r.is_empty() {
        return Err(AuxDataError::TrailingBytes { position: r.position() });
    }
    Ok(v)
}

fn decode_from(spec: &TypeSpec, r: &mut Reader<'_>, strictness: Strictness) -> Result<Value, AuxDataError> {
    Ok(match spec {
        TypeSpec::Uuid => Value::Uuid(r.uuid()?),
        TypeSpec::Uint64 => Value::U64(r.u64()?),
        TypeSpec::Int64 => Value::I64(r.i64()?),
        TypeSpec::String => Value::String(r.string()?),
        TypeSpec::Offset => Value::Offset(Offset { element: r.uuid()?, displacement: r.u64()? }),
        TypeSpec::Sequence(t) => {
            let (n, cap) = r.count()?;
            let mut items = Vec::with_capacity(cap);
            for _ in 0..n {
                items.push(decode_from(t, r, strictness)?);
            }
            Value::Sequence(items)
        }
        TypeSpec::Set(t) => {
            let (n, _) = r.count()?;
            let mut items = BTreeSet::new();
            let mut prev: Option<&[u8]> = None;
            for _ in 0..n {
                let start = r.position();
                let item = decode_from(t, r, strictness)?;
                let raw = r.raw_since(start);
                check_order(prev, raw, start, strictness)?;
                if !items.insert(item) {
                    return Err(AuxDataError::DuplicateKey { position: start });
                }
                prev = Some(raw);
            }
            Value::Set(items)
        }
        TypeSpec::Mapping(k, v) => {
            let (n, _) = r.count()?;
            let mut entries = BTreeMap::new();
            let mut prev: Option<&[u8]> = None;
            for _ in 0..n {
                let start = r.position();
                let key = decode_from(k, r, strictness)?;
                let raw = r.raw_since(start);
                check_order(prev, raw, start, strictness)?;
                let val = decode_from(v, r, strictness)?;
                if entries.insert(key, val).is_some() {
                    return Err(AuxDataError::DuplicateKey { position: start });
                }
                prev = Some(raw);
            }
            Value::Mapping(entries)
        }
        TypeSpec::Tuple(ts) => Value::Tuple(
            ts.iter()
                .map(|t| decode_from(t, r, strictness))
                .collect::<Result<_, _>>()?,
        ),
    })
}

fn check_order(prev: Option<&[u8]>, cur: &[u8], position: usize, strictness: Strictness) -> Result<(), AuxDataError> {
    match prev {
        Some(p) if strictness == Strictness::Strict && p >= cur => {
            Err(AuxDataError::UnsortedCanonicalForm { position })
        }
        _ => Ok(()),
    }
}

impl<'a> Reader<'a> {
    fn raw_since(&self, start: usize) -> &'a [u8] {
        self.slice(start, self.position())
    }
}

/// Conversion between Rust types and [`Value`] for typed table access.
pub trait AuxValue: Sized {
    fn type_spec() -> TypeSpec;
    fn to_value(&self) -> Value;
    fn from_value(v: Value) -> Option<Self>;
}

macro_rules! leaf_aux_value {
    ($ty:ty, $spec:ident, $variant:ident) => {
        impl AuxValue for $ty {
            fn type_spec() -> TypeSpec {
                TypeSpec::$spec
            }
            fn to_value(&self) -> Value {
                Value::$variant(self.clone())
            }
            fn from_value(v: Value) -> Option<Self> {
                match v {
                    Value::$variant(x) => Some(x),
                    _ => None,
                }
            }
        }
    };
}

leaf_aux_value!(Uuid, Uuid, Uuid);
leaf_aux_value!(u64, Uint64, U64);
leaf_aux_value!(i64, Int64, I64);
leaf_aux_value!(String, String, String);
leaf_aux_value!(Offset, Offset, Offset);

impl<T: AuxValue> AuxValue for Vec<T> {
    fn type_spec() -> TypeSpec {
        TypeSpec::sequence(T::type_spec())
    }
    fn to_value(&self) -> Value {
        Value::Sequence(self.iter().map(T::to_value).collect())
    }
    fn from_value(v: Value) -> Option<Self> {
        match v {
            Value::Sequence(items) => items.into_iter().map(T::from_value).collect(),
            _ => None,
        }
    }
}

impl<T: AuxValue + Ord> AuxValue for BTreeSet<T> {
    fn type_spec() -> TypeSpec {
        TypeSpec::set(T::type_spec())
    }
    fn to_value(&self) -> Value {
        Value::Set(self.iter().map(T::to_value).collect())
    }
    fn from_value(v: Value) -> Option<Self> {
        match v {
            Value::Set(items) => items.into_iter().map(T::from_value).collect(),
            _ => None,
        }
    }
}

impl<K: AuxValue + Ord, V: AuxValue> AuxValue for BTreeMap<K, V> {
    fn type_spec() -> TypeSpec {
        TypeSpec::mapping(K::type_spec(), V::type_spec())
    }
    fn to_value(&self) -> Value {
        Value::Mapping(self.iter().map(|(k, v)| (k.to_value(), v.to_value())).collect())
    }
    fn from_value(v: Value) -> Option<Self> {
        match v {
            Value::Mapping(entries) => entries
                .into_iter()
                .map(|(k, v)| Some((K::from_value(k)?, V::from_value(v)?)))
                .collect(),
            _ => None,
        }
    }
}

impl<A: AuxValue, B: AuxValue> AuxValue for (A, B) {
    fn type_spec() -> TypeSpec {
        TypeSpec::Tuple(vec![A::type_spec(), B::type_spec()])
    }
    fn to_value(&self) -> Value {
        Value::Tuple(vec![self.0.to_value(), self.1.to_value()])
    }
    fn from_value(v: Value) -> Option<Self> {
        match v {
            Value::Tuple(items) if items.len() == 2 => {
                let mut it = items.into_iter();
                Some((A::from_value(it.next()?)?, B::from_value(it.next()?)?))
            }
            _ => None,
        }
    }
}
