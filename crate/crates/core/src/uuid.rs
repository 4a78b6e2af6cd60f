use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// 128-bit identifier carried by every first-class IR entity.
///
/// Ordering is plain byte order, which is also the canonical order used by
/// the wire format and all textual output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Uuid([u8; 16]);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid uuid text {0:?}")]
pub struct ParseUuidError(pub String);

impl Uuid {
    pub const NIL: Uuid = Uuid([0; 16]);

    /// A fresh random (version 4) identifier.
    pub fn new() -> Self {
        let mut bytes: [u8; 16] = rand::random();
        bytes[6] = (bytes[6] & 0x0f) | 0x40;
        bytes[8] = (bytes[8] & 0x3f) | 0x80;
        Uuid(bytes)
    }

    pub const fn from_bytes(bytes: [u8; 16]) -> Self {
        Uuid(bytes)
    }

    pub const fn from_u128(v: u128) -> Self {
        Uuid(v.to_be_bytes())
    }

    pub const fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn is_nil(&self) -> bool {
        self.0 == [0; 16]
    }
}

impl fmt::Display for Uuid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.0.iter().enumerate() {
            if matches!(i, 4 | 6 | 8 | 10) {
                f.write_str("-")?;
            }
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Uuid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Uuid({self})")
    }
}

impl FromStr for Uuid {
    type Err = ParseUuidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex: Vec<u8> = s.bytes().filter(|&c| c != b'-').collect();
        if hex.len() != 32 {
            return Err(ParseUuidError(s.to_string()));
        }
        let mut out = [0u8; 16];
        for (i, pair) in hex.chunks(2).enumerate() {
            let text = std::str::from_utf8(pair).map_err(|_| ParseUuidError(s.to_string()))?;
            out[i] = u8::from_str_radix(text, 16).map_err(|_| ParseUuidError(s.to_string()))?;
        }
        Ok(Uuid(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_uuids_differ() {
        assert_ne!(Uuid::new(), Uuid::new());
    }

    #[test]
    fn display_parse_round_trip() {
        let id = Uuid::from_u128(0x0123_4567_89ab_cdef_0011_2233_4455_6677);
        let text = id.to_string();
        assert_eq!(text, "01234567-89ab-cdef-0011-223344556677");
        assert_eq!(text.parse::<Uuid>().unwrap(), id);
        assert!("xyz".parse::<Uuid>().is_err());
    }
}
