use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command as Process;

use minsup::analysis::Verdict;
use minsup::cli::{
    check_seed, parse_config, resolve_out, run, scenario, CheckSpec, Command, RunManifest, SCENARIO_NAMES,
};
use minsup::ladder::{GeneratorKind, REGISTRY_NAMES};
use serde_json::json;

fn cfg(v: serde_json::Value) -> minsup::cli::RunConfig {
    parse_config(&v.to_string()).unwrap()
}

fn err(v: serde_json::Value) -> String {
    parse_config(&v.to_string()).unwrap_err().to_string()
}

#[test]
fn minimal_config_takes_scenario_defaults() {
    let c = cfg(json!({"scenario": "entropic-1d", "seed": 7}));
    let mut want = scenario("entropic-1d").unwrap();
    want.seed = 7;
    assert_eq!(c, want);
    assert_eq!(c.generator, GeneratorKind::Entropic);
    assert_eq!(c.grid.dx, 0.02);
    assert_eq!(c.ladder.n_max, 16);
}

#[test]
fn config_errors_name_the_problem() {
    assert!(err(json!({"scenario": "entropic-1d"})).contains("seed required"));
    assert!(err(json!({"seed": 1})).contains("scenario required"));

    let e = err(json!({"scenario": "entropic-1d", "seed": 1, "generator": "quadrratic"}));
    assert!(e.contains("quadrratic"));
    for name in REGISTRY_NAMES {
        assert!(e.contains(name), "{e} lacks {name}");
    }

    let e = err(json!({"scenario": "entropic-1d", "seed": 1, "grid": {"dx": 5.0}}));
    assert!(e.contains("grid.dx") && e.contains('5') && e.contains("0.0001"), "{e}");
    let e = err(json!({"scenario": "entropic-1d", "seed": 1, "mc": {"n_paths": 1}}));
    assert!(e.contains("mc.n_paths"), "{e}");

    assert!(err(json!({"scenario": "entropic-1d", "seed": 1, "bogus": 1})).contains("bogus"));
    assert!(err(json!({"scenario": "entropic-1d", "seed": 1, "grid": {"ddx": 0.1}})).contains("ddx"));
    let e = err(json!({"scenario": "nope", "seed": 1}));
    assert!(SCENARIO_NAMES.iter().all(|n| e.contains(n)), "{e}");
    assert!(parse_config("[1, 2]").is_err());
    assert!(parse_config("{").is_err());
}

#[test]
fn overrides_merge_into_the_scenario() {
    let c = cfg(json!({
        "scenario": "entropic-1d",
        "seed": 3,
        "generator": {"name": "abs-z", "c": 2.0},
        "grid": {"dx": 0.05},
        "checks": [{"check": "lsc", "t": 0.25}],
    }));
    assert_eq!(c.generator, GeneratorKind::AbsZ { c: 2.0 });
    assert_eq!(c.grid.dx, 0.05);
    assert_eq!(c.grid.x_hi, 6.0);
    assert_eq!(c.checks, vec![CheckSpec::Lsc { t: 0.25 }]);
}

#[test]
fn configs_round_trip_exactly() {
    for name in SCENARIO_NAMES {
        let c = cfg(json!({"scenario": name, "seed": 12345678901u64, "grid": {"dx": 0.1 + 0.2}}));
        let text = c.to_json().unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, c, "{name}");
        assert_eq!(back.grid.dx.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(back.to_json().unwrap(), text);
    }
}

#[test]
fn output_directory_precedence() {
    let mut c = cfg(json!({"scenario": "epi-limits", "seed": 1}));
    assert_eq!(resolve_out(None, &c), Path::new("minsup-out"));
    c.out = Some("from-config".into());
    assert_eq!(resolve_out(None, &c), Path::new("from-config"));
    assert_eq!(resolve_out(Some("flag".into()), &c), Path::new("flag"));
}

#[test]
fn check_seeds_are_stable_and_distinct() {
    assert_eq!(check_seed(7, "markov", 0), check_seed(7, "markov", 0));
    assert_ne!(check_seed(7, "markov", 0), check_seed(7, "markov", 1));
    assert_ne!(check_seed(7, "markov", 0), check_seed(7, "shift", 0));
    assert_ne!(check_seed(7, "markov", 0), check_seed(8, "markov", 0));
}

fn small_markov(seed: u64) -> minsup::cli::RunConfig {
    cfg(json!({
        "scenario": "g-zero-linear",
        "seed": seed,
        "mc": {"n_paths": 20000, "steps": 20},
    }))
}

fn read_manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn feynman_kac_markov_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&small_markov(1), Command::Markov, dir.path()).unwrap();
    assert_eq!(m.exit_code, 0, "{:?} {:?}", m.verdicts, m.errors);
    assert_eq!(m.verdicts, vec![("markov".to_string(), Verdict::Pass)]);
    let files: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    for want in [
        "config.json",
        "surface.csv",
        "solver.json",
        "report-00-markov.json",
        "summary.csv",
    ] {
        assert!(files.contains(&want), "{files:?}");
    }
    assert_eq!(read_manifest(dir.path()), m);
    // written atomically: nothing but the listed files and the manifest
    let mut on_disk: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    on_disk.sort();
    let mut listed: Vec<String> = files
        .iter()
        .map(|s| s.to_string())
        .chain(["manifest.json".to_string()])
        .collect();
    listed.sort();
    assert_eq!(on_disk, listed);
    for f in &m.files {
        let bytes = std::fs::read(dir.path().join(&f.path)).unwrap();
        assert_eq!(bytes.len() as u64, f.bytes);
    }
}

#[test]
fn reruns_reproduce_every_checksum() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let c = small_markov(9);
    let ma = run(&c, Command::Run, a.path()).unwrap();
    let mb = run(&c, Command::Run, b.path()).unwrap();
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.config_sha256, mb.config_sha256);
    let other = run(&small_markov(10), Command::Run, tempfile::tempdir().unwrap().path()).unwrap();
    assert_ne!(other.config_sha256, ma.config_sha256);
}

#[test]
fn inconclusive_stability_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(json!({"scenario": "weighted-relu-z", "seed": 1}));
    let m = run(&c, Command::Stability, dir.path()).unwrap();
    assert_eq!(m.verdicts, vec![("stability".to_string(), Verdict::Inconclusive)]);
    assert_eq!(m.exit_code, 2);
}

#[test]
fn module_errors_exit_one_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(json!({
        "scenario": "g-zero-linear",
        "seed": 1,
        "grid": {"dx": 0.1},
        "checks": [{"check": "lsc", "t": 0.123456}],
    }));
    let m = run(&c, Command::Viscosity, dir.path()).unwrap();
    assert_eq!(m.exit_code, 1);
    assert_eq!(m.errors.len(), 1, "{:?}", m.errors);
    assert_eq!(read_manifest(dir.path()).errors, m.errors);

    // a subcommand with nothing to do is an error too
    let m = run(&c, Command::Locality, tempfile::tempdir().unwrap().path()).unwrap();
    assert_eq!(m.exit_code, 1);
}

#[test]
fn ladder_and_conjugate_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(json!({"scenario": "entropic-1d", "seed": 1, "ladder": {"n_max": 6}}));
    let m = run(&c, Command::Ladder, dir.path()).unwrap();
    assert_eq!(m.exit_code, 0, "{:?}", m.errors);
    let lm: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("ladder.json")).unwrap()).unwrap();
    assert!(lm.is_object());
    let m = run(&c, Command::Conjugate, dir.path()).unwrap();
    assert_eq!(m.exit_code, 0, "{:?}", m.errors);
    assert!(dir.path().join("conjugate.csv").exists());
}

fn minsup() -> Process {
    Process::new(env!("CARGO_BIN_EXE_minsup"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = minsup()
        .args(["limits", "--scenario", "epi-limits", "--seed", "4", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let stdout = String::from_utf8(ok.stdout).unwrap();
    assert!(
        stdout.contains("limits: pass") || stdout.contains("epi_limit: pass"),
        "{stdout}"
    );
    assert!(dir.path().join("summary.csv").exists());

    let bad = minsup().args(["solve", "--scenario", "entropic-1d"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("seed required"));

    // MINSUP_OUT stands in for --out
    let env_dir = tempfile::tempdir().unwrap();
    let via_env = minsup()
        .args(["limits", "--scenario", "epi-limits", "--seed", "4"])
        .env("MINSUP_OUT", env_dir.path())
        .output()
        .unwrap();
    assert_eq!(via_env.status.code(), Some(0));
    let a: BTreeMap<String, String> = read_manifest(dir.path())
        .files
        .into_iter()
        .map(|f| (f.path, f.sha256))
        .collect();
    let b: BTreeMap<String, String> = read_manifest(env_dir.path())
        .files
        .into_iter()
        .map(|f| (f.path, f.sha256))
        .collect();
    assert_eq!(a, b);
}

/// Seeds named `bad_*` must be rejected, every other seed accepted.
#[test]
fn fuzz_corpus_seeds_stay_meaningful() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let expect_ok = |path: &Path| !path.file_stem().unwrap().to_str().unwrap().starts_with("bad_");
    for e in std::fs::read_dir(root.join("parse_config")).unwrap() {
        let path = e.unwrap().path();
        let parsed = parse_config(&std::fs::read_to_string(&path).unwrap());
        assert_eq!(
            parsed.is_ok(),
            expect_ok(&path),
            "{}: {:?}",
            path.display(),
            parsed.err()
        );
    }
    for e in std::fs::read_dir(root.join("grid_function_csv")).unwrap() {
        let path = e.unwrap().path();
        let f = minsup::convexlab::GridFunction::read_csv(std::fs::File::open(&path).unwrap());
        assert_eq!(f.is_ok(), expect_ok(&path), "{}: {:?}", path.display(), f.err());
    }
}
