//! Rewriting primitives and the layout/relocation engine.
//!
//! [`split_interval`], [`insert_bytes`] and [`move_block`] edit the IR in
//! place. [`layout`] assigns fresh interval addresses, and [`build_image`]
//! places interval contents into a flat image and re-encodes every
//! symbolic expression that has an [`EncodingDirective`].

mod edit;
mod image;
mod layout;

use thiserror::Error;

use crate::auxdata::AuxDataError;
use crate::ir::IrError;
use crate::uuid::Uuid;

pub use edit::{insert_bytes, move_block, split_interval};
pub use image::{
    build_image, encoding_directives, eval_symexpr, set_encoding, symbol_addresses, Endianness, EncodingDirective,
    Image, MAX_IMAGE_LEN, SE_ENCODINGS,
};
pub use layout::{layout, AddressAssignment};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error(transparent)]
    AuxData(#[from] AuxDataError),
    #[error("offset {offset} is out of range for size {size}")]
    OutOfRange { offset: u64, size: u64 },
    #[error("BlockStraddlesSplit({0})")]
    BlockStraddlesSplit(Uuid),
    #[error("ProxyNotMovable({0})")]
    ProxyNotMovable(Uuid),
    #[error("AmbiguousSymExprOwnership: offset {offset} is covered by {moving} and {other}")]
    AmbiguousSymExprOwnership { offset: u64, moving: Uuid, other: Uuid },
    #[error("AlignmentNotPowerOfTwo: block {block} has alignment {alignment}")]
    AlignmentNotPowerOfTwo { block: Uuid, alignment: u64 },
    #[error("UnsatisfiableAlignment in interval {0}")]
    UnsatisfiableAlignment(Uuid),
    #[error("address computation overflows for interval {0}")]
    AddressOverflow(Uuid),
    #[error("UnresolvedSymbol({0})")]
    UnresolvedSymbol(Uuid),
    #[error("symbolic expression has scale 0")]
    ScaleZero,
    #[error("symbolic expression arithmetic overflows")]
    ArithmeticOverflow,
    #[error("OverlappingIntervals({0}, {1})")]
    OverlappingIntervals(Uuid, Uuid),
    #[error("interval {0} is in a loaded section but has no assigned address")]
    MissingAssignment(Uuid),
    #[error("assignment names {0}, which is not a byte interval")]
    UnknownInterval(Uuid),
    #[error("EncodedValueOverflow({offset}): value {value} does not fit {width} byte(s) in interval {interval}")]
    EncodedValueOverflow { interval: Uuid, offset: u64, value: i64, width: u8 },
    #[error("encoding of width {width} at offset {offset} runs past the end of interval {interval}")]
    EncodingOutOfRange { interval: Uuid, offset: u64, width: u8 },
    #[error("invalid encoding directive bits {0:#x}")]
    InvalidDirective(u64),
    #[error("image of {0} bytes exceeds the size limit")]
    ImageTooLarge(u64),
}
