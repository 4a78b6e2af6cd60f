//! The `bir` command-line tool. Each command renders plain text with a
//! stable order so outputs can be compared byte for byte.
//!
//! Exit codes: 0 success, 1 a finding (violations, differences, layout
//! failure), 2 an I/O or parse failure.

mod diff;
mod dot;
mod dump;
mod stats;

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use bir_core::{build_image, layout, load_unchecked, validate, Ir};
use clap::{Parser, Subcommand};

pub use diff::{diff, DiffEntry, DiffKind};
pub use dot::cfg_dot;
pub use dump::dump;
pub use stats::stats;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FINDING: u8 = 1;
pub const EXIT_FAILURE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "bir", version, about = "Inspect, check and lay out .bir files")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List structural violations; exit 1 if there are any.
    Validate { path: PathBuf },
    /// Count entities, edges by kind and AuxData sizes.
    Stats { path: PathBuf },
    /// Hierarchical listing of the whole IR.
    Dump { path: PathBuf },
    /// Export the control-flow graph as Graphviz DOT.
    CfgDot { path: PathBuf },
    /// Structural difference keyed by UUID; exit 1 if the files differ.
    Diff { a: PathBuf, b: PathBuf },
    /// Rewrite a file in canonical form (in place unless OUTPUT is given).
    Canonicalize { input: PathBuf, output: Option<PathBuf> },
    /// Assign fresh addresses and write a flat image plus an address map.
    Layout {
        path: PathBuf,
        #[arg(long, value_parser = parse_hex)]
        base: u64,
        #[arg(long)]
        out_image: PathBuf,
        #[arg(long)]
        out_map: PathBuf,
    },
}

fn parse_hex(s: &str) -> Result<u64, String> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    u64::from_str_radix(digits, 16).map_err(|e| format!("invalid hex address {s:?}: {e}"))
}

/// Reads and parses a file. Only format-level problems are errors here;
/// reference problems are left for `validate` to report.
pub fn load_file(path: &Path) -> Result<Ir, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    load_unchecked(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

/// Text output of `validate`, one violation per line.
pub fn validate_report(ir: &Ir) -> (String, u8) {
    let violations = validate(ir);
    let mut out = String::new();
    for v in &violations {
        writeln!(out, "{v}").unwrap();
    }
    (out, if violations.is_empty() { EXIT_OK } else { EXIT_FINDING })
}

/// Text output of `diff`, one difference per line.
pub fn diff_report(a: &Ir, b: &Ir) -> (String, u8) {
    let entries = diff(a, b);
    let mut out = String::new();
    for e in &entries {
        writeln!(out, "{e}").unwrap();
    }
    (out, if entries.is_empty() { EXIT_OK } else { EXIT_FINDING })
}

/// The address map written by `layout`: one `uuid 0xbase size` line per
/// interval, in address order.
pub fn address_map(ir: &Ir, assignment: &bir_core::AddressAssignment) -> String {
    let mut rows: Vec<(u64, bir_core::Uuid, u64)> = assignment
        .iter()
        .map(|(id, base)| (*base, *id, ir.interval(*id).map_or(0, |bi| bi.size)))
        .collect();
    rows.sort();
    let mut out = String::new();
    for (base, id, size) in rows {
        writeln!(out, "{id} {base:#x} {size}").unwrap();
    }
    out
}

/// Runs one command, writing its report to `out` and diagnostics to
/// `err`, and returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match execute(cli.command, out) {
        Ok(code) => code,
        Err((code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn failure(msg: String) -> (u8, String) {
    (EXIT_FAILURE, msg)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), (u8, String)> {
    out.write_all(text.as_bytes()).map_err(|e| failure(format!("writing output: {e}")))
}

fn execute(command: Command, out: &mut dyn Write) -> Result<u8, (u8, String)> {
    match command {
        Command::Validate { path } => {
            let ir = load_file(&path).map_err(failure)?;
            let (text, code) = validate_report(&ir);
            emit(out, &text)?;
            Ok(code)
        }
        Command::Stats { path } => {
            emit(out, &stats(&load_file(&path).map_err(failure)?))?;
            Ok(EXIT_OK)
        }
        Command::Dump { path } => {
            emit(out, &dump(&load_file(&path).map_err(failure)?))?;
            Ok(EXIT_OK)
        }
        Command::CfgDot { path } => {
            emit(out, &cfg_dot(&load_file(&path).map_err(failure)?))?;
            Ok(EXIT_OK)
        }
        Command::Diff { a, b } => {
            let a = load_file(&a).map_err(failure)?;
            let b = load_file(&b).map_err(failure)?;
            let (text, code) = diff_report(&a, &b);
            emit(out, &text)?;
            Ok(code)
        }
        Command::Canonicalize { input, output } => {
            let bytes = std::fs::read(&input).map_err(|e| failure(format!("{}: {e}", input.display())))?;
            let canon = bir_core::canonicalize(&bytes).map_err(|e| failure(format!("{}: {e}", input.display())))?;
            let dest = output.unwrap_or(input);
            std::fs::write(&dest, canon).map_err(|e| failure(format!("{}: {e}", dest.display())))?;
            Ok(EXIT_OK)
        }
        Command::Layout { path, base, out_image, out_map } => {
            let ir = load_file(&path).map_err(failure)?;
            let assignment = layout(&ir, base).map_err(|e| (EXIT_FINDING, e.to_string()))?;
            let image = build_image(&ir, &assignment).map_err(|e| (EXIT_FINDING, e.to_string()))?;
            std::fs::write(&out_image, &image.bytes).map_err(|e| failure(format!("{}: {e}", out_image.display())))?;
            std::fs::write(&out_map, address_map(&ir, &assignment))
                .map_err(|e| failure(format!("{}: {e}", out_map.display())))?;
            Ok(EXIT_OK)
        }
    }
}

/// Hex bytes separated by spaces; longer runs show the first and last
/// eight bytes around `..`.
pub(crate) fn hex_preview(bytes: &[u8]) -> String {
    let hex = |b: &[u8]| b.iter().map(|x| format!("{x:02x}")).collect::<Vec<_>>().join(" ");
    if bytes.len() <= 16 {
        hex(bytes)
    } else {
        format!("{} .. {}", hex(&bytes[..8]), hex(&bytes[bytes.len() - 8..]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_parsing() {
        assert_eq!(parse_hex("0x1000"), Ok(0x1000));
        assert_eq!(parse_hex("ff"), Ok(255));
        assert!(parse_hex("0xzz").is_err());
    }

    #[test]
    fn preview_elides_middle() {
        assert_eq!(hex_preview(&[0xde, 0xad, 0xbe, 0xef]), "de ad be ef");
        let long: Vec<u8> = (0..20).collect();
        assert_eq!(hex_preview(&long), "00 01 02 03 04 05 06 07 .. 0c 0d 0e 0f 10 11 12 13");
        assert_eq!(hex_preview(&long[..16]).split(' ').count(), 16);
    }
}
