use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Shape of an AuxData payload.
///
/// Canonical text form:
///
/// ```text
/// spec := "UUID" | "uint64" | "int64" | "string" | "Offset"
///       | "sequence<" spec ">" | "set<" spec ">"
///       | "mapping<" spec "," spec ">" | "tuple<" spec ("," spec)* ">"
/// ```
///
/// The parser tolerates whitespace between tokens; [`Display`](fmt::Display)
/// always prints the whitespace-free canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeSpec {
    Uuid,
    Uint64,
    Int64,
    String,
    Offset,
    Sequence(Box<TypeSpec>),
    Set(Box<TypeSpec>),
    Mapping(Box<TypeSpec>, Box<TypeSpec>),
    Tuple(Vec<TypeSpec>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("type spec syntax error at position {position}: {message}")]
pub struct TypeSpecError {
    pub position: usize,
    pub message: String,
}

const MAX_NESTING: usize = 64;

impl TypeSpec {
    pub fn sequence(inner: TypeSpec) -> Self {
        TypeSpec::Sequence(Box::new(inner))
    }

    pub fn set(inner: TypeSpec) -> Self {
        TypeSpec::Set(Box::new(inner))
    }

    pub fn mapping(key: TypeSpec, value: TypeSpec) -> Self {
        TypeSpec::Mapping(Box::new(key), Box::new(value))
    }

    pub fn parse(text: &str) -> Result<Self, TypeSpecError> {
        let mut p = Parser { src: text.as_bytes(), pos: 0 };
        let spec = p.spec(0)?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("trailing input"));
        }
        Ok(spec)
    }

    /// Nesting depth; leaves have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            TypeSpec::Sequence(t) | TypeSpec::Set(t) => 1 + t.depth(),
            TypeSpec::Mapping(k, v) => 1 + k.depth().max(v.depth()),
            TypeSpec::Tuple(ts) => 1 + ts.iter().map(TypeSpec::depth).max().unwrap_or(0),
            _ => 1,
        }
    }
}

impl fmt::Display for TypeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeSpec::Uuid => f.write_str("UUID"),
            TypeSpec::Uint64 => f.write_str("uint64"),
            TypeSpec::Int64 => f.write_str("int64"),
            TypeSpec::String => f.write_str("string"),
            TypeSpec::Offset => f.write_str("Offset"),
            TypeSpec::Sequence(t) => write!(f, "sequence<{t}>"),
            TypeSpec::Set(t) => write!(f, "set<{t}>"),
            TypeSpec::Mapping(k, v) => write!(f, "mapping<{k},{v}>"),
            TypeSpec::Tuple(ts) => {
                f.write_str("tuple<")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(">")
            }
        }
    }
}

impl FromStr for TypeSpec {
    type Err = TypeSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TypeSpec::parse(s)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> TypeSpecError {
        TypeSpecError { position: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), TypeSpecError> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", c as char)))
        }
    }

    fn word(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).expect("ascii")
    }

    fn spec(&mut self, depth: usize) -> Result<TypeSpec, TypeSpecError> {
        self.skip_ws();
        if depth > MAX_NESTING {
            return Err(self.error("nesting too deep"));
        }
        let start = self.pos;
        let spec = match self.word() {
            "UUID" => TypeSpec::Uuid,
            "uint64" => TypeSpec::Uint64,
            "int64" => TypeSpec::Int64,
            "string" => TypeSpec::String,
            "Offset" => TypeSpec::Offset,
            "sequence" => {
                self.expect(b'<')?;
                let t = self.spec(depth + 1)?;
                self.expect(b'>')?;
                TypeSpec::sequence(t)
            }
            "set" => {
                self.expect(b'<')?;
                let t = self.spec(depth + 1)?;
                self.expect(b'>')?;
                TypeSpec::set(t)
            }
            "mapping" => {
                self.expect(b'<')?;
                let k = self.spec(depth + 1)?;
                self.expect(b',')?;
                let v = self.spec(depth + 1)?;
                self.expect(b'>')?;
                TypeSpec::mapping(k, v)
            }
            "tuple" => {
                self.expect(b'<')?;
                let mut ts = vec![self.spec(depth + 1)?];
                loop {
                    self.skip_ws();
                    match self.src.get(self.pos) {
                        Some(b',') => {
                            self.pos += 1;
                            ts.push(self.spec(depth + 1)?);
                        }
                        Some(b'>') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.error("expected ',' or '>'")),
                    }
                }
                TypeSpec::Tuple(ts)
            }
            "" => return Err(self.error("expected a type")),
            other => {
                let msg = format!("unknown type {other:?}");
                self.pos = start;
                return Err(self.error(msg));
            }
        };
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_function_blocks_schema() {
        let spec = TypeSpec::parse("mapping<UUID,set<UUID>>").unwrap();
        assert_eq!(spec, TypeSpec::mapping(TypeSpec::Uuid, TypeSpec::set(TypeSpec::Uuid)));
        assert_eq!(spec.to_string(), "mapping<UUID,set<UUID>>");
    }

    #[test]
    fn parses_leaf() {
        assert_eq!(TypeSpec::parse("uint64").unwrap(), TypeSpec::Uint64);
    }

    #[test]
    fn unbalanced_reports_position() {
        let err = TypeSpec::parse("mapping<UUID").unwrap_err();
        assert_eq!(err.position, 12);
    }

    #[test]
    fn rejects_trailing_garbage_and_unknown_words() {
        assert_eq!(TypeSpec::parse("uint64>").unwrap_err().position, 6);
        assert_eq!(TypeSpec::parse("set<float>").unwrap_err().position, 4);
        assert!(TypeSpec::parse("").is_err());
        assert!(TypeSpec::parse("tuple<>").is_err());
    }

    #[test]
    fn whitespace_is_canonicalized() {
        let spec = TypeSpec::parse(" tuple< UUID , mapping<Offset, string> ,int64 > ").unwrap();
        assert_eq!(spec.to_string(), "tuple<UUID,mapping<Offset,string>,int64>");
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let text = "sequence<".repeat(10_000) + "uint64" + &">".repeat(10_000);
        assert!(TypeSpec::parse(&text).is_err());
    }
}
