//! Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on
//! any failure. Values checked here come from test-side oracles (i128
//! evaluation, manual byte decoding, tree walks), not from the library
//! routines under test.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bir_core::auxdata::{decode_value, encode_value, sanctioned_spec, Strictness, SANCTIONED, ALIGNMENT};
use bir_core::rewrite::{encoding_directives, Endianness};
use bir_core::{
    build_image, canonicalize, eval_symexpr, insert_bytes, layout, load, move_block, save, split_interval, validate,
    AddressAssignment, Cfg, EdgeKind, EdgeLabel, Ir, Offset, SymbolPayload, SymbolicExpression,
    Uuid, ViolationCode,
};
use bir_testkit::{gen, inject, oracle, rng, TestRng};
use rand::seq::SliceRandom;
use rand::Rng;

const ROUND_TRIP_CASES: u64 = 500;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(30);
const RELOCATION_CASES: u64 = 200;
const RELOCATION_BUDGET: Duration = Duration::from_secs(60);
const BASES: [u64; 2] = [0x10000, 0x7ff000];
const MUTATION_BASES: u64 = 50;
const CODEC_PAIRS: u64 = 1000;
const CODEC_MAX_DEPTH: usize = 4;
const EDGE_TRIALS: u64 = 200;

type Outcome = Result<String, String>;

fn round_trip_ir(seed: u64) -> Ir {
    gen::random_ir(&mut rng(seed), &gen::GenConfig::default())
}

fn digest_of_saves() -> Vec<u64> {
    (0..ROUND_TRIP_CASES)
        .map(|seed| {
            let mut h = DefaultHasher::new();
            save(&round_trip_ir(seed)).expect("generated IR saves").hash(&mut h);
            h.finish()
        })
        .collect()
}

fn round_trip(canon_inputs: &mut Vec<Vec<u8>>) -> Outcome {
    let start = Instant::now();
    let cfg = gen::GenConfig::default();
    let mut digests = Vec::new();
    for seed in 0..ROUND_TRIP_CASES {
        let ir = round_trip_ir(seed);
        let bounds = (
            ir.modules().len(),
            ir.modules().iter().flat_map(|m| m.intervals()).count(),
            ir.modules().iter().flat_map(|m| m.intervals()).map(|bi| bi.blocks.len()).sum::<usize>(),
            ir.cfg().edge_count(),
        );
        if bounds.0 > cfg.max_modules || bounds.1 > cfg.max_intervals || bounds.2 > cfg.max_blocks || bounds.3 > cfg.max_edges {
            return Err(format!("seed {seed}: generator exceeded bounds {bounds:?}"));
        }
        let bytes = save(&ir).map_err(|e| format!("seed {seed}: save: {e}"))?;
        let back = load(&bytes).map_err(|e| format!("seed {seed}: load: {e}"))?;
        oracle::structurally_equal(&ir, &back).map_err(|e| format!("seed {seed}: {e}"))?;
        if save(&ir).unwrap() != bytes {
            return Err(format!("seed {seed}: save differs within one process"));
        }
        let mut h = DefaultHasher::new();
        bytes.hash(&mut h);
        digests.push(h.finish());
        canon_inputs.push(bytes);
    }
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let child = Command::new(exe).arg("--digest-child").output().map_err(|e| e.to_string())?;
    let theirs: Vec<u64> = String::from_utf8_lossy(&child.stdout).lines().filter_map(|l| l.parse().ok()).collect();
    if theirs != digests {
        return Err(format!("second process produced {} digests, {} differ", theirs.len(),
            theirs.iter().zip(&digests).filter(|(a, b)| a != b).count()));
    }
    let elapsed = start.elapsed();
    if elapsed > ROUND_TRIP_BUDGET {
        return Err(format!("{ROUND_TRIP_CASES} IRs took {elapsed:.1?} (budget {ROUND_TRIP_BUDGET:?})"));
    }
    Ok(format!("{ROUND_TRIP_CASES} IRs, two processes agree, {elapsed:.1?}"))
}

fn canonical_fixed_point(inputs: &[Vec<u8>]) -> Outcome {
    for (k, bytes) in inputs.iter().enumerate() {
        let once = canonicalize(bytes).map_err(|e| format!("input {k}: {e}"))?;
        let twice = canonicalize(&once).map_err(|e| format!("input {k}: {e}"))?;
        if once != twice {
            return Err(format!("input {k}: canonicalize is not idempotent"));
        }
        if once != *bytes {
            return Err(format!("input {k}: saved bytes are not canonical"));
        }
    }
    Ok(format!("{} encodings", inputs.len()))
}

/// Independent view of where every symbol lands under an assignment.
fn oracle_symbol_addresses(ir: &Ir, assignment: &AddressAssignment) -> BTreeMap<Uuid, i128> {
    let mut block_addr = BTreeMap::new();
    for m in ir.modules() {
        for s in &m.sections {
            for bi in &s.intervals {
                if let Some(&base) = assignment.get(&bi.uuid) {
                    for e in &bi.blocks {
                        block_addr.insert(e.block.uuid(), base as i128 + e.offset as i128);
                    }
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for m in ir.modules() {
        for s in &m.symbols {
            match s.payload {
                SymbolPayload::Value(v) => {
                    out.insert(s.uuid, v as i128);
                }
                SymbolPayload::Referent(r) => {
                    if let Some(&a) = block_addr.get(&r) {
                        out.insert(s.uuid, a);
                    }
                }
                SymbolPayload::Undefined => {}
            }
        }
    }
    out
}

fn oracle_eval(expr: &SymbolicExpression, addrs: &BTreeMap<Uuid, i128>) -> Option<i128> {
    match *expr {
        SymbolicExpression::SymAddrConst { symbol, offset } => Some(addrs.get(&symbol)? + offset as i128),
        SymbolicExpression::SymAddrAddr { minuend, subtrahend, scale, offset } => {
            let diff = addrs.get(&minuend)? - addrs.get(&subtrahend)?;
            Some(diff / scale as i128 + offset as i128)
        }
    }
}

fn read_unsigned(bytes: &[u8], big_endian: bool) -> u128 {
    let mut v = 0u128;
    if big_endian {
        for &b in bytes {
            v = (v << 8) | b as u128;
        }
    } else {
        for &b in bytes.iter().rev() {
            v = (v << 8) | b as u128;
        }
    }
    v
}

/// Site layout check on the test side: within each interval, directive
/// windows are disjoint and inside the interval, and every expression has
/// a directive.
fn sites_well_placed(ir: &Ir) -> Result<(), String> {
    for m in ir.modules() {
        let directives = encoding_directives(ir, m.uuid).map_err(|e| e.to_string())?;
        for bi in m.intervals() {
            let mut reach = 0u64;
            for (&off, _) in &bi.sym_exprs {
                let d = directives
                    .get(&Offset::new(bi.uuid, off))
                    .ok_or_else(|| format!("sym_expr {}+{off} has no directive", bi.uuid))?;
                if off < reach {
                    return Err(format!("site {}+{off} overlaps the previous site", bi.uuid));
                }
                reach = off + d.width as u64;
                if reach > bi.size {
                    return Err(format!("site {}+{off} runs past the interval end", bi.uuid));
                }
            }
        }
    }
    Ok(())
}

fn directive_coverage(ir: &Ir) -> Result<(), String> {
    for m in ir.modules() {
        let directives = encoding_directives(ir, m.uuid).map_err(|e| e.to_string())?;
        for bi in m.intervals() {
            for &off in bi.sym_exprs.keys() {
                if !directives.contains_key(&Offset::new(bi.uuid, off)) {
                    return Err(format!("sym_expr {}+{off} lost its directive", bi.uuid));
                }
            }
        }
    }
    Ok(())
}

fn intervals_of(ir: &Ir) -> Vec<(Uuid, u64)> {
    ir.modules().iter().flat_map(|m| m.intervals()).map(|bi| (bi.uuid, bi.size)).collect()
}

fn blocks_of(ir: &Ir) -> Vec<(Uuid, u64)> {
    ir.modules()
        .iter()
        .flat_map(|m| m.intervals())
        .flat_map(|bi| bi.blocks.iter().map(|e| (e.block.uuid(), e.block.size())))
        .collect()
}

fn random_rewrite(ir: &mut Ir, r: &mut TestRng) -> Result<&'static str, String> {
    let intervals = intervals_of(ir);
    let &(iv, size) = intervals.choose(r).ok_or("no intervals")?;
    match r.gen_range(0..3) {
        0 => {
            let at = r.gen_range(0..=size);
            split_interval(ir, iv, at).map(|_| "split").map_err(|e| e.to_string())
        }
        1 => {
            let at = r.gen_range(0..=size);
            let payload: Vec<u8> = (0..r.gen_range(1..=24)).map(|_| r.gen()).collect();
            insert_bytes(ir, iv, at, &payload).map(|_| "insert").map_err(|e| e.to_string())
        }
        _ => {
            let blocks = blocks_of(ir);
            let &(b, bsize) = blocks.choose(r).ok_or("no blocks")?;
            let fitting: Vec<(Uuid, u64)> = intervals.iter().copied().filter(|&(_, s)| s >= bsize).collect();
            let &(dest, dsize) = fitting.choose(r).ok_or("no interval fits")?;
            let at = r.gen_range(0..=dsize - bsize);
            move_block(ir, b, dest, at).map(|_| "move").map_err(|e| e.to_string())
        }
    }
}

#[derive(Default)]
struct RelocationStats {
    applied: BTreeMap<&'static str, usize>,
    reverted: BTreeMap<String, usize>,
    sites: usize,
    layouts: Vec<(Ir, AddressAssignment)>,
}

fn check_image(ir: &Ir, assignment: &AddressAssignment, tag: &str) -> Result<usize, String> {
    let image = build_image(ir, assignment).map_err(|e| format!("{tag}: build_image: {e}"))?;
    let oracle_addrs = oracle_symbol_addresses(ir, assignment);
    let lib_addrs: BTreeMap<Uuid, i64> = oracle_addrs.iter().map(|(&k, &v)| (k, v as i64)).collect();
    let mut sites = 0;
    for m in ir.modules() {
        let directives = encoding_directives(ir, m.uuid).map_err(|e| e.to_string())?;
        for bi in m.intervals() {
            let base = assignment[&bi.uuid];
            for (&off, expr) in &bi.sym_exprs {
                let d = directives[&Offset::new(bi.uuid, off)];
                let addr = base + off;
                let raw = image
                    .read(addr, d.width as usize)
                    .ok_or_else(|| format!("{tag}: site {addr:#x} outside image"))?;
                let decoded = read_unsigned(raw, d.endianness == Endianness::Big);
                let mut expected =
                    oracle_eval(expr, &oracle_addrs).ok_or_else(|| format!("{tag}: unresolved site {addr:#x}"))?;
                let via_lib = eval_symexpr(expr, &lib_addrs).map_err(|e| format!("{tag}: eval_symexpr: {e}"))?;
                if via_lib as i128 != expected {
                    return Err(format!("{tag}: eval_symexpr {via_lib} != oracle {expected} at {addr:#x}"));
                }
                if d.pc_relative {
                    expected -= addr as i128;
                }
                let mask = (1u128 << (8 * d.width as u32)) - 1;
                if decoded != (expected as u128) & mask {
                    return Err(format!(
                        "{tag}: site {addr:#x} width {} decodes to {decoded:#x}, oracle {expected:#x}",
                        d.width
                    ));
                }
                sites += 1;
            }
        }
    }
    Ok(sites)
}

fn reference_preservation(stats: &mut RelocationStats, canon_inputs: &mut Vec<Vec<u8>>) -> Outcome {
    let start = Instant::now();
    for seed in 0..RELOCATION_CASES {
        let mut r = rng(0x5eed_0000 + seed);
        let mut ir = gen::random_relocatable_ir(&mut r);
        sites_well_placed(&ir).map_err(|e| format!("seed {seed}: generator: {e}"))?;
        for _ in 0..r.gen_range(1..=20) {
            let before = ir.clone();
            let kind = random_rewrite(&mut ir, &mut r);
            directive_coverage(&ir).map_err(|e| format!("seed {seed}: {e}"))?;
            let reject = match &kind {
                Err(e) => Some(e.split(['(', ' ', ':']).next().unwrap_or("error").to_string()),
                Ok(_) if !validate(&ir).is_empty() => Some("invalid".into()),
                Ok(_) if sites_well_placed(&ir).is_err() => Some("sites".into()),
                Ok(_) if !BASES.iter().all(|&b| layout(&ir, b).is_ok()) => Some("layout".into()),
                Ok(_) => None,
            };
            match (kind, reject) {
                (Ok(k), None) => *stats.applied.entry(k).or_default() += 1,
                (_, Some(why)) => {
                    ir = before;
                    *stats.reverted.entry(why).or_default() += 1;
                }
                (Err(_), None) => unreachable!(),
            }
        }
        for base in BASES {
            let assignment = layout(&ir, base).map_err(|e| format!("seed {seed}: layout: {e}"))?;
            stats.sites += check_image(&ir, &assignment, &format!("seed {seed} base {base:#x}"))?;
            stats.layouts.push((ir.clone(), assignment));
        }
        canon_inputs.push(save(&ir).map_err(|e| format!("seed {seed}: save: {e}"))?);
    }
    let elapsed = start.elapsed();
    if elapsed > RELOCATION_BUDGET {
        return Err(format!("{RELOCATION_CASES} IRs took {elapsed:.1?} (budget {RELOCATION_BUDGET:?})"));
    }
    if stats.applied.len() < 3 {
        return Err(format!("rewrite kinds exercised: {:?}", stats.applied));
    }
    Ok(format!(
        "{RELOCATION_CASES} IRs, rewrites applied {:?}, reverted {:?}, {} sites exact, {elapsed:.1?}",
        stats.applied, stats.reverted, stats.sites
    ))
}

fn alignment_property(layouts: &[(Ir, AddressAssignment)]) -> Outcome {
    let (mut aligned, mut total, mut intervals) = (0usize, 0usize, 0usize);
    for (k, (ir, assignment)) in layouts.iter().enumerate() {
        for m in ir.modules() {
            let align: BTreeMap<Uuid, u64> = m.aux_data.get(ALIGNMENT).map_err(|e| e.to_string())?.unwrap_or_default();
            for bi in m.intervals() {
                let base = *assignment.get(&bi.uuid).ok_or_else(|| format!("layout {k}: unassigned interval"))?;
                for e in &bi.blocks {
                    if let Some(&a) = align.get(&e.block.uuid()) {
                        total += 1;
                        if (base + e.offset) % a == 0 {
                            aligned += 1;
                        }
                    }
                }
            }
        }
        let mut spans: Vec<(u64, u64)> = assignment
            .iter()
            .map(|(id, &b)| (b, b + ir.interval(*id).unwrap().size))
            .filter(|(s, e)| s != e)
            .collect();
        spans.sort();
        intervals += spans.len();
        if let Some(w) = spans.windows(2).find(|w| w[0].1 > w[1].0) {
            return Err(format!("layout {k}: intervals {:#x?} and {:#x?} overlap", w[0], w[1]));
        }
    }
    if aligned != total || total == 0 {
        return Err(format!("{aligned}/{total} aligned blocks satisfied"));
    }
    Ok(format!("{aligned}/{total} aligned blocks, {intervals} intervals disjoint over {} layouts", layouts.len()))
}

fn validator_mutation() -> Outcome {
    let mut detected = 0;
    for seed in 0..MUTATION_BASES {
        let base = round_trip_ir(1000 + seed);
        let clean = validate(&base);
        if !clean.is_empty() {
            return Err(format!("seed {seed}: unmutated IR reports {}", clean[0]));
        }
        for code in ViolationCode::ALL {
            let mut ir = base.clone();
            inject::inject(&mut ir, code, &mut rng(seed * 31 + code as u64));
            let found: HashSet<ViolationCode> = validate(&ir).into_iter().map(|v| v.code).collect();
            if !found.contains(&code) {
                return Err(format!("seed {seed}: injected {} not reported (got {found:?})", code.name()));
            }
            detected += 1;
        }
    }
    Ok(format!("{detected}/{} injections detected, {MUTATION_BASES} clean bases", MUTATION_BASES * 9))
}

fn codec_fuzz() -> Outcome {
    let mut r = rng(0xc0dec);
    for k in 0..CODEC_PAIRS {
        let spec = gen::type_spec(&mut r, CODEC_MAX_DEPTH);
        if spec.depth() > CODEC_MAX_DEPTH {
            return Err(format!("pair {k}: spec depth {} exceeds {CODEC_MAX_DEPTH}", spec.depth()));
        }
        let value = gen::value(&mut r, &spec);
        let bytes = encode_value(&spec, &value).map_err(|e| format!("pair {k} {spec}: {e}"))?;
        let back = decode_value(&spec, &bytes, Strictness::Strict).map_err(|e| format!("pair {k} {spec}: {e}"))?;
        if back != value {
            return Err(format!("pair {k} {spec}: value changed"));
        }
    }
    for (label, text) in SANCTIONED {
        let spec = sanctioned_spec(label).ok_or_else(|| format!("{label}: no registry spec"))?;
        if spec.to_string() != text {
            return Err(format!("{label}: spec renders as {spec}, registry says {text}"));
        }
        for _ in 0..20 {
            let value = gen::value(&mut r, &spec);
            let mut tables = bir_core::AuxDataTables::new();
            tables.set_table(label, &spec, &value).map_err(|e| format!("{label}: {e}"))?;
            let back = tables.get_table(label, &spec).map_err(|e| format!("{label}: {e}"))?;
            if back.as_ref() != Some(&value) {
                return Err(format!("{label}: table value changed"));
            }
        }
    }
    Ok(format!("{CODEC_PAIRS} pairs (depth <= {CODEC_MAX_DEPTH}), {} sanctioned labels", SANCTIONED.len()))
}

fn edge_labels() -> Outcome {
    let mut seen = BTreeSet::new();
    for conditional in [false, true] {
        for direct in [false, true] {
            for ordinal in 0..6u8 {
                let kind = EdgeKind::from_ordinal(ordinal).ok_or("missing edge kind")?;
                let label = EdgeLabel::new(conditional, direct, kind);
                let code = label.code();
                let expect = conditional as u8 | (direct as u8) << 1 | ordinal << 2;
                if code != expect {
                    return Err(format!("{label}: code {code}, expected {expect}"));
                }
                if EdgeLabel::from_code(code).ok() != Some(label) {
                    return Err(format!("{label}: code {code} does not decode back"));
                }
                seen.insert(code);
            }
        }
    }
    if seen.len() != 24 {
        return Err(format!("{} distinct codes", seen.len()));
    }
    for code in 24..=u8::MAX {
        if EdgeLabel::from_code(code).is_ok() {
            return Err(format!("code {code} decodes"));
        }
    }

    let mut r = rng(0xed9e);
    let mut accepted = 0;
    let mut rejected = 0;
    for _ in 0..EDGE_TRIALS {
        let nodes: Vec<Uuid> = (0..r.gen_range(1..=6)).map(|_| gen::uuid(&mut r)).collect();
        let mut cfg = Cfg::new();
        let mut model: BTreeSet<(Uuid, Uuid, u8)> = BTreeSet::new();
        for _ in 0..40 {
            let (s, t) = (*nodes.choose(&mut r).unwrap(), *nodes.choose(&mut r).unwrap());
            let label = EdgeLabel::from_code(r.gen_range(0..24)).unwrap();
            let bad_fallthrough = label.kind == EdgeKind::Fallthrough && (label.conditional || !label.direct);
            let second_fallthrough = label.kind == EdgeKind::Fallthrough
                && model.iter().any(|&(ms, _, c)| ms == s && EdgeLabel::from_code(c).unwrap().kind == EdgeKind::Fallthrough);
            let duplicate = model.contains(&(s, t, label.code()));
            let should_accept = !bad_fallthrough && !second_fallthrough && !duplicate;
            match (cfg.add_edge(s, t, label), should_accept) {
                (Ok(_), true) => {
                    model.insert((s, t, label.code()));
                    accepted += 1;
                }
                (Err(_), false) => rejected += 1,
                (got, _) => return Err(format!("add_edge({label}) returned {got:?}, model expected accept={should_accept}")),
            }
        }
        let stored: BTreeSet<(Uuid, Uuid, u8)> = cfg.edges().map(|e| (e.source, e.target, e.label.code())).collect();
        if stored != model {
            return Err("cfg edge set diverged from model".into());
        }
    }
    Ok(format!("24 labels bijective, {accepted} edges accepted and {rejected} rejected as modeled"))
}

fn cli_goldens() -> Outcome {
    common::check_fixture_files()?;
    let mut results = common::golden_checks();
    results.extend(common::exit_code_checks());
    let total = results.len();
    let failures: Vec<String> = results.into_iter().filter_map(|(n, r)| r.err().map(|e| format!("{n}: {e}"))).collect();
    if !failures.is_empty() {
        return Err(failures.join("; "));
    }
    Ok(format!("{} fixtures, {total} checks", common::stems().len()))
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--digest-child") {
        for d in digest_of_saves() {
            println!("{d}");
        }
        return ExitCode::SUCCESS;
    }
    // The libtest-style flags cargo passes (e.g. --nocapture) are ignored.

    let mut canon_inputs = Vec::new();
    let mut relocation = RelocationStats::default();
    let mut criteria: Vec<(&str, Outcome)> = Vec::new();
    criteria.push(("round-trip", round_trip(&mut canon_inputs)));
    let reloc = reference_preservation(&mut relocation, &mut canon_inputs);
    for (_, ir) in bir_testkit::fixtures::all() {
        canon_inputs.push(save(&ir).unwrap());
    }
    criteria.push(("canonical-fixed-point", canonical_fixed_point(&canon_inputs)));
    criteria.push(("reference-preservation", reloc));
    criteria.push(("alignment", alignment_property(&relocation.layouts)));
    criteria.push(("validator-mutation", validator_mutation()));
    criteria.push(("auxdata-codec-fuzz", codec_fuzz()));
    criteria.push(("edge-label-bijection", edge_labels()));
    criteria.push(("cli-goldens", cli_goldens()));

    let mut failed = 0;
    for (name, outcome) in &criteria {
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
