use std::collections::BTreeMap;

use crate::auxdata::AuxDataError;
use crate::ir::{Ir, IrError, NodeKind};
use crate::model::{Offset, SymbolPayload, SymbolicExpression};
use crate::uuid::Uuid;

use super::{AddressAssignment, RewriteError};

/// Module AuxData table holding encoding directives, keyed by
/// `Offset(interval, site offset)`.
pub const SE_ENCODINGS: &str = "seEncodings";

/// Largest image `build_image` will allocate.
pub const MAX_IMAGE_LEN: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endianness {
    Little,
    Big,
}

/// How a symbolic expression's value is written into an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncodingDirective {
    pub width: u8,
    pub endianness: Endianness,
    pub pc_relative: bool,
}

impl EncodingDirective {
    pub fn new(width: u8, endianness: Endianness, pc_relative: bool) -> Self {
        assert!(matches!(width, 1 | 2 | 4 | 8), "width must be 1, 2, 4 or 8");
        EncodingDirective { width, endianness, pc_relative }
    }

    /// Bits 0–3 width, bit 4 big-endian, bit 5 pc-relative.
    pub fn to_bits(self) -> u64 {
        let mut bits = self.width as u64;
        if self.endianness == Endianness::Big {
            bits |= 1 << 4;
        }
        if self.pc_relative {
            bits |= 1 << 5;
        }
        bits
    }

    pub fn from_bits(bits: u64) -> Result<Self, RewriteError> {
        let width = (bits & 0xf) as u8;
        if bits >> 6 != 0 || !matches!(width, 1 | 2 | 4 | 8) {
            return Err(RewriteError::InvalidDirective(bits));
        }
        let endianness = if bits & (1 << 4) != 0 { Endianness::Big } else { Endianness::Little };
        Ok(EncodingDirective { width, endianness, pc_relative: bits & (1 << 5) != 0 })
    }

    /// Whether `v` is representable in `width` bytes as signed or unsigned.
    pub fn fits(self, v: i64) -> bool {
        if self.width == 8 {
            return true;
        }
        let bits = 8 * self.width as u32;
        let v = v as i128;
        v >= -(1i128 << (bits - 1)) && v < (1i128 << bits)
    }

    /// The low `width` bytes of `v` in the directive's byte order.
    pub fn encode(self, v: i64) -> Vec<u8> {
        let w = self.width as usize;
        match self.endianness {
            Endianness::Little => v.to_le_bytes()[..w].to_vec(),
            Endianness::Big => v.to_be_bytes()[8 - w..].to_vec(),
        }
    }

    /// Reads `width` bytes as an unsigned integer.
    pub fn decode(self, bytes: &[u8]) -> u64 {
        let bytes = &bytes[..self.width as usize];
        let mut buf = [0u8; 8];
        match self.endianness {
            Endianness::Little => {
                buf[..bytes.len()].copy_from_slice(bytes);
                u64::from_le_bytes(buf)
            }
            Endianness::Big => {
                buf[8 - bytes.len()..].copy_from_slice(bytes);
                u64::from_be_bytes(buf)
            }
        }
    }
}

/// A flat memory image covering `[base, base + bytes.len())`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Image {
    pub base: u64,
    pub bytes: Vec<u8>,
}

impl Image {
    /// Bytes at absolute address `addr`, if the whole range is covered.
    pub fn read(&self, addr: u64, len: usize) -> Option<&[u8]> {
        let start = usize::try_from(addr.checked_sub(self.base)?).ok()?;
        self.bytes.get(start..start.checked_add(len)?)
    }
}

/// Evaluates `expr` given symbol addresses. Division truncates toward zero.
pub fn eval_symexpr(expr: &SymbolicExpression, addr_of: &BTreeMap<Uuid, i64>) -> Result<i64, RewriteError> {
    let addr = |s: Uuid| addr_of.get(&s).copied().ok_or(RewriteError::UnresolvedSymbol(s));
    match *expr {
        SymbolicExpression::SymAddrConst { symbol, offset } => {
            addr(symbol)?.checked_add(offset).ok_or(RewriteError::ArithmeticOverflow)
        }
        SymbolicExpression::SymAddrAddr { minuend, subtrahend, scale, offset } => {
            if scale == 0 {
                return Err(RewriteError::ScaleZero);
            }
            addr(minuend)?
                .checked_sub(addr(subtrahend)?)
                .and_then(|d| d.checked_div(scale))
                .and_then(|q| q.checked_add(offset))
                .ok_or(RewriteError::ArithmeticOverflow)
        }
    }
}

/// Addresses of every symbol resolvable under `assignment`: the referent
/// block's address, or the symbol's absolute value. Symbols that are
/// undefined, refer to proxies, or refer to unassigned intervals are absent.
pub fn symbol_addresses(ir: &Ir, assignment: &AddressAssignment) -> BTreeMap<Uuid, i64> {
    let mut out = BTreeMap::new();
    for m in ir.modules() {
        for s in &m.symbols {
            let addr = match s.payload {
                SymbolPayload::Value(v) => Some(v),
                SymbolPayload::Referent(r) => ir
                    .block_placement(r)
                    .and_then(|p| assignment.get(&p.interval).map(|b| b.wrapping_add(p.offset) as i64)),
                SymbolPayload::Undefined => None,
            };
            if let Some(a) = addr {
                out.insert(s.uuid, a);
            }
        }
    }
    out
}

/// All encoding directives of a module, keyed by (interval, offset).
pub fn encoding_directives(ir: &Ir, module: Uuid) -> Result<BTreeMap<Offset, EncodingDirective>, RewriteError> {
    let m = ir.module(module).ok_or(IrError::UnknownUuid(module))?;
    let raw: BTreeMap<Offset, u64> = m.aux_data.get(SE_ENCODINGS)?.unwrap_or_default();
    raw.into_iter().map(|(k, bits)| Ok((k, EncodingDirective::from_bits(bits)?))).collect()
}

/// Records the directive for the symbolic expression at `offset` of
/// `interval`, in the interval's module.
pub fn set_encoding(
    ir: &mut Ir,
    interval: Uuid,
    offset: u64,
    directive: EncodingDirective,
) -> Result<(), RewriteError> {
    if ir.kind_of(interval) != Some(NodeKind::ByteInterval) {
        return Err(AuxDataError::DanglingReference(interval).into());
    }
    let module = ir.owning_module(interval).expect("interval has a module").uuid;
    let tables = ir.module_aux_data_mut(module)?;
    let mut raw: BTreeMap<Offset, u64> = tables.get(SE_ENCODINGS)?.unwrap_or_default();
    raw.insert(Offset::new(interval, offset), directive.to_bits());
    tables.set(SE_ENCODINGS, &raw)?;
    Ok(())
}

/// Places each assigned interval at its base and writes every symbolic
/// expression that has a directive. Gaps between intervals are zero.
pub fn build_image(ir: &Ir, assignment: &AddressAssignment) -> Result<Image, RewriteError> {
    for m in ir.modules() {
        for s in m.sections.iter().filter(|s| s.is_loaded()) {
            for bi in &s.intervals {
                if !assignment.contains_key(&bi.uuid) {
                    return Err(RewriteError::MissingAssignment(bi.uuid));
                }
            }
        }
    }
    let mut spans = Vec::with_capacity(assignment.len());
    for (&id, &base) in assignment {
        let bi = ir.interval(id).ok_or(RewriteError::UnknownInterval(id))?;
        let end = base.checked_add(bi.size).ok_or(RewriteError::AddressOverflow(id))?;
        spans.push((base, end, id));
    }
    spans.sort();
    let mut reach: Option<(u64, Uuid)> = None;
    for &(start, end, id) in &spans {
        if start == end {
            continue;
        }
        if let Some((far, owner)) = reach {
            if start < far {
                return Err(RewriteError::OverlappingIntervals(owner, id));
            }
        }
        if reach.map_or(true, |(far, _)| end > far) {
            reach = Some((end, id));
        }
    }
    let Some(base) = spans.iter().map(|s| s.0).min() else {
        return Ok(Image::default());
    };
    let end = spans.iter().map(|s| s.1).max().unwrap();
    let len = end - base;
    if len > MAX_IMAGE_LEN {
        return Err(RewriteError::ImageTooLarge(len));
    }
    let mut bytes = vec![0u8; len as usize];
    for &(start, _, id) in &spans {
        let bi = ir.interval(id).unwrap();
        let at = (start - base) as usize;
        bytes[at..at + bi.size as usize].copy_from_slice(&bi.read(0, bi.size));
    }

    let addrs = symbol_addresses(ir, assignment);
    for m in ir.modules() {
        let directives = encoding_directives(ir, m.uuid)?;
        for bi in m.intervals() {
            let Some(&ibase) = assignment.get(&bi.uuid) else { continue };
            for (&off, expr) in &bi.sym_exprs {
                let Some(&d) = directives.get(&Offset::new(bi.uuid, off)) else { continue };
                if off.checked_add(d.width as u64).map_or(true, |e| e > bi.size) {
                    return Err(RewriteError::EncodingOutOfRange { interval: bi.uuid, offset: off, width: d.width });
                }
                let mut v = eval_symexpr(expr, &addrs)?;
                if d.pc_relative {
                    let site = ibase.wrapping_add(off) as i64;
                    v = v.checked_sub(site).ok_or(RewriteError::ArithmeticOverflow)?;
                }
                if !d.fits(v) {
                    return Err(RewriteError::EncodedValueOverflow { interval: bi.uuid, offset: off, value: v, width: d.width });
                }
                let at = (ibase - base + off) as usize;
                bytes[at..at + d.width as usize].copy_from_slice(&d.encode(v));
            }
        }
    }
    Ok(Image { base, bytes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ByteInterval, Module, Section, SectionFlag, Symbol};
    use crate::rewrite::layout;

    #[test]
    fn directive_bits_round_trip() {
        for width in [1, 2, 4, 8] {
            for endianness in [Endianness::Little, Endianness::Big] {
                for pc_relative in [false, true] {
                    let d = EncodingDirective::new(width, endianness, pc_relative);
                    assert_eq!(EncodingDirective::from_bits(d.to_bits()), Ok(d));
                }
            }
        }
        for bad in [0u64, 3, 0x40 | 4, 16] {
            assert_eq!(EncodingDirective::from_bits(bad), Err(RewriteError::InvalidDirective(bad)));
        }
    }

    #[test]
    fn fits_signed_or_unsigned() {
        let d = EncodingDirective::new(1, Endianness::Little, false);
        assert!(d.fits(-128) && d.fits(255));
        assert!(!d.fits(-129) && !d.fits(256) && !d.fits(0x1234));
        let d = EncodingDirective::new(8, Endianness::Little, false);
        assert!(d.fits(i64::MIN) && d.fits(i64::MAX));
    }

    #[test]
    fn encode_decode() {
        let d = EncodingDirective::new(4, Endianness::Big, false);
        assert_eq!(d.encode(0x11223344), vec![0x11, 0x22, 0x33, 0x44]);
        assert_eq!(d.decode(&[0x11, 0x22, 0x33, 0x44]), 0x11223344);
        let d = EncodingDirective::new(2, Endianness::Little, false);
        assert_eq!(d.encode(-2), vec![0xfe, 0xff]);
        assert_eq!(d.decode(&[0xfe, 0xff]), 0xfffe);
    }

    #[test]
    fn eval_examples() {
        let (s, s1, s2) = (Uuid::from_u128(1), Uuid::from_u128(2), Uuid::from_u128(3));
        let addrs = BTreeMap::from([(s, 0x400000), (s1, 0x1010), (s2, 0x1000)]);
        let c = SymbolicExpression::SymAddrConst { symbol: s, offset: 8 };
        assert_eq!(eval_symexpr(&c, &addrs), Ok(0x400008));
        let d = SymbolicExpression::SymAddrAddr { minuend: s1, subtrahend: s2, scale: 4, offset: 0 };
        assert_eq!(eval_symexpr(&d, &addrs), Ok(4));
        let three = BTreeMap::from([(s1, 3), (s2, 0)]);
        assert_eq!(eval_symexpr(&d, &three), Ok(0));
        let minus = BTreeMap::from([(s1, 0), (s2, 3)]);
        assert_eq!(eval_symexpr(&d, &minus), Ok(0));
        let ghost = Uuid::from_u128(9);
        let g = SymbolicExpression::SymAddrConst { symbol: ghost, offset: 0 };
        assert_eq!(eval_symexpr(&g, &addrs), Err(RewriteError::UnresolvedSymbol(ghost)));
        let z = SymbolicExpression::SymAddrAddr { minuend: s1, subtrahend: s2, scale: 0, offset: 0 };
        assert_eq!(eval_symexpr(&z, &addrs), Err(RewriteError::ScaleZero));
        let big = BTreeMap::from([(s1, i64::MIN), (s2, 0)]);
        let n = SymbolicExpression::SymAddrAddr { minuend: s1, subtrahend: s2, scale: -1, offset: 0 };
        assert_eq!(eval_symexpr(&n, &big), Err(RewriteError::ArithmeticOverflow));
    }

    struct Fx {
        ir: Ir,
        i0: Uuid,
        i1: Uuid,
        target: Uuid,
        sym: Uuid,
    }

    fn fx() -> Fx {
        let mut ir = Ir::new(1);
        let m = ir.add_module(Module::new("m")).unwrap();
        let s = ir.add_section(m, Section::new(".text").with_flags([SectionFlag::Loaded])).unwrap();
        let i0 = ir.add_interval(s, ByteInterval::from_contents(vec![0xcc; 12])).unwrap();
        let i1 = ir.add_interval(s, ByteInterval::new(4)).unwrap();
        ir.add_code_block(i0, 0, 12).unwrap();
        let target = ir.add_code_block(i1, 0, 4).unwrap();
        let sym = ir.add_symbol(m, Symbol::new("t", SymbolPayload::Referent(target))).unwrap();
        Fx { ir, i0, i1, target, sym }
    }

    #[test]
    fn absolute_width8_site() {
        let mut f = fx();
        f.ir.set_sym_expr(f.i0, 2, SymbolicExpression::SymAddrConst { symbol: f.sym, offset: 0 }).unwrap();
        set_encoding(&mut f.ir, f.i0, 2, EncodingDirective::new(8, Endianness::Little, false)).unwrap();
        let a = layout(&f.ir, 0x400000).unwrap();
        let img = build_image(&f.ir, &a).unwrap();
        assert_eq!(img.base, 0x400000);
        assert_eq!(img.bytes.len(), 16);
        assert_eq!(img.read(0x400002, 8).unwrap(), &0x40000cu64.to_le_bytes());
        assert_eq!(img.bytes[0], 0xcc);
        assert_eq!(img.bytes[10], 0xcc);
        let _ = f.target;
    }

    #[test]
    fn pc_relative_to_next_interval() {
        let mut f = fx();
        f.ir.set_sym_expr(f.i0, 4, SymbolicExpression::SymAddrConst { symbol: f.sym, offset: 0 }).unwrap();
        set_encoding(&mut f.ir, f.i0, 4, EncodingDirective::new(4, Endianness::Little, true)).unwrap();
        let mut a = AddressAssignment::new();
        a.insert(f.i0, 0x1000);
        a.insert(f.i1, 0x2000);
        let img = build_image(&f.ir, &a).unwrap();
        // target 0x2000, site 0x1004
        assert_eq!(img.read(0x1004, 4).unwrap(), &0xffcu32.to_le_bytes());
        assert_eq!(img.bytes.len(), 0x1004);
        assert!(img.bytes[12..0x1000].iter().all(|&b| b == 0));
    }

    #[test]
    fn overflow_and_unencoded_sites() {
        let mut f = fx();
        f.ir.set_sym_expr(f.i0, 1, SymbolicExpression::SymAddrConst { symbol: f.sym, offset: 0 }).unwrap();
        let a = AddressAssignment::from([(f.i0, 0x1000), (f.i1, 0x1234)]);
        let img = build_image(&f.ir, &a).unwrap();
        assert_eq!(img.bytes[1], 0xcc);
        set_encoding(&mut f.ir, f.i0, 1, EncodingDirective::new(1, Endianness::Little, false)).unwrap();
        assert!(matches!(build_image(&f.ir, &a), Err(RewriteError::EncodedValueOverflow { offset: 1, value: 0x1234, .. })));
        set_encoding(&mut f.ir, f.i0, 1, EncodingDirective::new(8, Endianness::Little, false)).unwrap();
        f.ir.set_sym_expr(f.i0, 8, SymbolicExpression::SymAddrConst { symbol: f.sym, offset: 0 }).unwrap();
        set_encoding(&mut f.ir, f.i0, 8, EncodingDirective::new(8, Endianness::Little, false)).unwrap();
        assert!(matches!(build_image(&f.ir, &a), Err(RewriteError::EncodingOutOfRange { offset: 8, .. })));
    }

    #[test]
    fn assignment_errors() {
        let f = fx();
        assert_eq!(
            build_image(&f.ir, &AddressAssignment::from([(f.i0, 0)])),
            Err(RewriteError::MissingAssignment(f.i1))
        );
        let overlapping = AddressAssignment::from([(f.i0, 0x100), (f.i1, 0x108)]);
        assert!(matches!(build_image(&f.ir, &overlapping), Err(RewriteError::OverlappingIntervals(..))));
        let touching = AddressAssignment::from([(f.i0, 0x100), (f.i1, 0x10c)]);
        assert!(build_image(&f.ir, &touching).is_ok());
        let stray = Uuid::from_u128(77);
        let mut a = touching.clone();
        a.insert(stray, 0);
        assert_eq!(build_image(&f.ir, &a), Err(RewriteError::UnknownInterval(stray)));
    }

    #[test]
    fn empty_ir_gives_empty_image() {
        let ir = Ir::new(1);
        let a = layout(&ir, 0x1000).unwrap();
        assert!(a.is_empty());
        assert_eq!(build_image(&ir, &a).unwrap(), Image::default());
    }
}
