//! Golden-file helpers shared by the golden tests and the acceptance
//! harness. Set `BIR_BLESS=1` to rewrite fixtures and goldens.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use bir_testkit::fixtures;

pub fn tests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

pub fn fixture_path(stem: &str) -> PathBuf {
    tests_dir().join("fixtures").join(format!("{stem}.bir"))
}

fn golden_path(name: &str) -> PathBuf {
    tests_dir().join("golden").join(name)
}

pub fn blessing() -> bool {
    std::env::var_os("BIR_BLESS").is_some_and(|v| v == "1")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn bir(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_bir"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .expect("spawn bir");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
    }
}

/// Compares `actual` with the golden file `name`, or rewrites it when
/// blessing.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_path(name);
    if blessing() {
        std::fs::write(&path, actual).map_err(|e| format!("{}: {e}", path.display()))?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!("{name}: output differs from golden\n--- expected\n{expected}\n--- actual\n{actual}"))
    }
}

/// Runs [`check_fixture_files`] once per process and panics on failure.
/// Tests that read fixture files call this first so blessing never races
/// a reader.
pub fn fixtures_ready() {
    static READY: std::sync::OnceLock<Result<(), String>> = std::sync::OnceLock::new();
    if let Err(e) = READY.get_or_init(check_fixture_files) {
        panic!("{e}");
    }
}

/// Checks that the checked-in fixture files are exactly what the testkit
/// builders serialize to (or writes them when blessing).
pub fn check_fixture_files() -> Result<(), String> {
    let mut files: Vec<(String, Vec<u8>)> =
        fixtures::all().into_iter().map(|(n, ir)| (n.to_string(), bir_core::save(&ir).unwrap())).collect();
    files.push(("malformed".into(), fixtures::malformed_bytes()));
    files.push(("truncated".into(), fixtures::truncated_bytes()));
    files.push(("bad_alignment".into(), bir_core::save(&fixtures::bad_alignment()).unwrap()));
    for (stem, bytes) in files {
        let path = fixture_path(&stem);
        if blessing() {
            std::fs::write(&path, &bytes).map_err(|e| format!("{}: {e}", path.display()))?;
            continue;
        }
        let on_disk = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        if on_disk != bytes {
            return Err(format!("{} is stale; rerun with BIR_BLESS=1", path.display()));
        }
    }
    Ok(())
}

pub fn stems() -> Vec<&'static str> {
    fixtures::all().into_iter().map(|(n, _)| n).collect()
}

/// Every golden comparison: validate, stats, dump and cfg-dot on each
/// fixture, diff of each fixture against the next, and the layout outputs.
pub fn golden_checks() -> Vec<(String, Result<(), String>)> {
    let mut results = Vec::new();
    let stems = stems();
    for (k, stem) in stems.iter().enumerate() {
        let file = fixture_path(stem);
        for cmd in ["validate", "stats", "dump", "cfg-dot"] {
            let run = bir(&[&cmd, &file]);
            let r = if run.code != 0 {
                Err(format!("{cmd} {stem}: exit {} stderr {}", run.code, run.stderr))
            } else {
                check_golden(&format!("{stem}.{cmd}.txt"), &run.stdout)
            };
            results.push((format!("{cmd} {stem}"), r));
        }
        let next = stems[(k + 1) % stems.len()];
        let run = bir(&[&"diff", &file, &fixture_path(next)]);
        let r = if run.code != 1 {
            Err(format!("diff {stem} {next}: exit {} stderr {}", run.code, run.stderr))
        } else {
            check_golden(&format!("{stem}.diff.{next}.txt"), &run.stdout)
        };
        results.push((format!("diff {stem} {next}"), r));
        let same = bir(&[&"diff", &file, &file]);
        let r = if same.code == 0 && same.stdout.is_empty() {
            Ok(())
        } else {
            Err(format!("diff {stem} {stem}: exit {} output {:?}", same.code, same.stdout))
        };
        results.push((format!("diff {stem} itself"), r));
    }
    results.push(("layout aligned_layout".into(), layout_golden()));
    results
}

fn layout_golden() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (img, map) = (dir.path().join("out.img"), dir.path().join("out.map"));
    let run = bir(&[
        &"layout",
        &fixture_path("aligned_layout"),
        &"--base",
        &"0x1000",
        &"--out-image",
        &img,
        &"--out-map",
        &map,
    ]);
    if run.code != 0 {
        return Err(format!("layout: exit {} stderr {}", run.code, run.stderr));
    }
    let image = std::fs::read(&img).map_err(|e| e.to_string())?;
    let hex: Vec<String> = image.chunks(16).map(|c| c.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")).collect();
    check_golden("aligned_layout.layout.img.txt", &(hex.join("\n") + "\n"))?;
    check_golden("aligned_layout.layout.map.txt", &std::fs::read_to_string(&map).map_err(|e| e.to_string())?)
}

/// The exit-code contract on defective inputs and the layout edge cases.
pub fn exit_code_checks() -> Vec<(String, Result<(), String>)> {
    let mut results = Vec::new();
    let expect = |name: &str, run: Run, code: i32, needle: &str, stream_is_err: bool| -> (String, Result<(), String>) {
        let text = if stream_is_err { &run.stderr } else { &run.stdout };
        let r = if run.code == code && text.contains(needle) {
            Ok(())
        } else {
            Err(format!("exit {} (want {code}); stdout {:?}; stderr {:?}", run.code, run.stdout, run.stderr))
        };
        (name.to_string(), r)
    };

    let malformed = fixture_path("malformed");
    let run = bir(&[&"validate", &malformed]);
    let lines = run.stdout.lines().count();
    let mut r = expect("validate malformed", run, 1, "DanglingReference", false);
    if r.1.is_ok() && lines != 1 {
        r.1 = Err(format!("{lines} violation lines, want 1"));
    }
    results.push(r);

    let truncated = fixture_path("truncated");
    for cmd in ["validate", "stats", "dump", "cfg-dot"] {
        results.push(expect(&format!("{cmd} truncated"), bir(&[&cmd, &truncated]), 2, "Truncated(", true));
    }
    results.push(expect("diff truncated", bir(&[&"diff", &truncated, &malformed]), 2, "Truncated(", true));
    let missing = tests_dir().join("fixtures").join("does_not_exist.bir");
    results.push(expect("validate missing file", bir(&[&"validate", &missing]), 2, "error:", true));

    let dir = tempfile::tempdir().unwrap();
    let (img, map) = (dir.path().join("i"), dir.path().join("m"));
    let run = bir(&[&"layout", &fixture_path("bad_alignment"), &"--base", &"1000", &"--out-image", &img, &"--out-map", &map]);
    results.push(expect("layout bad alignment", run, 1, "AlignmentNotPowerOfTwo", true));
    let run = bir(&[&"layout", &fixture_path("empty"), &"--base", &"0x1000", &"--out-image", &img, &"--out-map", &map]);
    let mut r = expect("layout empty", run, 0, "", false);
    if r.1.is_ok() {
        let sizes = (std::fs::metadata(&img).map(|m| m.len()), std::fs::metadata(&map).map(|m| m.len()));
        if !matches!(sizes, (Ok(0), Ok(0))) {
            r.1 = Err(format!("image/map sizes {sizes:?}"));
        }
    }
    results.push(r);

    let copy = dir.path().join("copy.bir");
    std::fs::copy(fixture_path("functions"), &copy).unwrap();
    let run = bir(&[&"canonicalize", &copy]);
    let same = std::fs::read(&copy).ok() == std::fs::read(fixture_path("functions")).ok();
    let mut r = expect("canonicalize in place", run, 0, "", false);
    if r.1.is_ok() && !same {
        r.1 = Err("canonical fixture changed by canonicalize".into());
    }
    results.push(r);
    results
}
