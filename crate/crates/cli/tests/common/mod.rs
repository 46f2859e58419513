#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_tractghg");

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> PathBuf {
    manifest_dir().join("tests/fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    manifest_dir().join("tests/golden").join(name)
}

/// Set `TRACTGHG_BLESS=1` to rewrite golden directories from the current
/// engine instead of comparing against them.
pub fn blessing() -> bool {
    std::env::var_os("TRACTGHG_BLESS").is_some()
}

pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(BIN).args(args).output().expect("binary runs")
}

pub fn run_ok<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = run(args);
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Every regular file under `dir`, keyed by relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let p = entry.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&p).expect("readable file"));
            }
        }
    }
    out
}

/// Compares the files of `actual` that are present in `expected`
/// byte-for-byte; returns a description of each mismatch.
pub fn diff_against(expected: &Path, actual: &Path) -> Vec<String> {
    let want = read_tree(expected);
    let got = read_tree(actual);
    let mut problems = Vec::new();
    if want.is_empty() {
        problems.push(format!("no golden files in {}", expected.display()));
    }
    for (name, bytes) in &want {
        match got.get(name) {
            None => problems.push(format!("{name}: not produced")),
            Some(b) if b != bytes => problems.push(format!("{name}: differs from golden")),
            Some(_) => {}
        }
    }
    problems
}

/// Copies `from` over `to` (golden refresh).
pub fn bless(from: &Path, to: &Path, keep: impl Fn(&str) -> bool) {
    for (name, bytes) in read_tree(from) {
        if keep(&name) {
            let dst = to.join(&name);
            std::fs::create_dir_all(dst.parent().unwrap()).unwrap();
            std::fs::write(dst, bytes).unwrap();
        }
    }
}

/// Synthetic inputs for the golden runs: a small lattice so the files
/// stay reviewable.
pub const SYNTH_ARGS: [&str; 4] = ["--seed", "42", "--side", "7"];

pub const SCENARIO_TEXT: &str = "# carpool and transit up one point each\nregion = mapc\ndelta.w_carpool = 0.01\ndelta.w_pubtrans = 0.01\n";

/// Runs `synth`, `fit`, `scenario` and `inventory both` into `root`,
/// each in its own subdirectory.
pub fn run_pipeline(root: &Path) {
    let synth = root.join("synth");
    let mut args = vec!["synth".to_string(), "--out-dir".into(), synth.display().to_string()];
    args.extend(SYNTH_ARGS.iter().map(|s| s.to_string()));
    run_ok(&args);

    let conf = synth.join("tractghg.conf");
    let fit = root.join("fit");
    run_ok([
        "--config".as_ref(),
        conf.as_os_str(),
        "--out-dir".as_ref(),
        fit.as_os_str(),
        "fit".as_ref(),
    ]);

    let scen_file = root.join("scenario.txt");
    std::fs::write(&scen_file, SCENARIO_TEXT).unwrap();
    let scen = root.join("scenario");
    run_ok([
        "scenario".as_ref(),
        "--fit".as_ref(),
        fit.join("fit_slm_ml.json").as_os_str(),
        "--scenario".as_ref(),
        scen_file.as_os_str(),
        "--out-dir".as_ref(),
        scen.as_os_str(),
    ]);

    let f = fixture("three_tract");
    let inv = root.join("inventory");
    run_ok([
        "inventory".as_ref(),
        "--method".as_ref(),
        "both".as_ref(),
        "--tracts".as_ref(),
        f.join("tracts.geojson").as_os_str(),
        "--roads".as_ref(),
        f.join("roads.geojson").as_os_str(),
        "--census".as_ref(),
        f.join("vehicle_census.csv").as_os_str(),
        "--out-dir".as_ref(),
        inv.as_os_str(),
    ]);
}

pub const PIPELINE_STAGES: [&str; 4] = ["synth", "fit", "scenario", "inventory"];
