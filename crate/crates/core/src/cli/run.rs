use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use log::{error, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{CheckSpec, RunConfig};
use crate::analysis::{
    check_limit_family, check_locality, check_lsc, check_markov_identity, check_shift_identity, check_stability,
    viscosity_residual, write_summary, CheckReport, LocalityConfig, MarkovConfig, ShiftConfig, StabilityConfig,
    Verdict, ViscosityConfig,
};
use crate::backward::{solve_ladder, LadderSolution, SolverManifest, ValueSurface};
use crate::convexlab::Axis;
use crate::convexlab::{dual_box, legendre_conjugate, GridFunction, RecConfig};
use crate::error::{Error, Result};
use crate::ladder::{build_gn, verify_monotone_ladder, LadderManifest, ProbeGrid3};

/// Rows kept in the exported surface CSV.
const SURFACE_ROWS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Ladder surface plus every configured check.
    Run,
    Solve,
    Ladder,
    Conjugate,
    Stability,
    Locality,
    /// Markov and shift identities.
    Markov,
    /// Viscosity residual and lower semicontinuity.
    Viscosity,
    Limits,
}

impl Command {
    fn selects(&self, c: &CheckSpec) -> bool {
        match self {
            Command::Run => true,
            Command::Solve | Command::Ladder | Command::Conjugate => false,
            Command::Stability => matches!(c, CheckSpec::Stability { .. }),
            Command::Locality => matches!(c, CheckSpec::Locality { .. }),
            Command::Markov => matches!(c, CheckSpec::Markov { .. } | CheckSpec::Shift { .. }),
            Command::Viscosity => matches!(c, CheckSpec::Viscosity { .. } | CheckSpec::Lsc { .. }),
            Command::Limits => matches!(c, CheckSpec::Limits { .. }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub command: Command,
    pub config_sha256: String,
    pub versions: BTreeMap<String, String>,
    /// Seconds per stage; the only non-deterministic field.
    pub wall_times: BTreeMap<String, f64>,
    /// Every emitted file except this manifest.
    pub files: Vec<FileEntry>,
    pub verdicts: Vec<(String, Verdict)>,
    pub errors: Vec<String>,
    pub exit_code: i32,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes to a temporary file in `dir` and renames it into place.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileEntry> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| Error::Io(e.error))?;
    Ok(FileEntry {
        path: name.into(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    })
}

/// Per-check seed from `(seed, check name, position)`, independent of scheduling.
pub fn check_seed(seed: u64, name: &str, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    h.update((index as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Executes `command` for `cfg`, writing artifacts into `out`. Module errors are
/// recorded in the manifest and give exit code 1; only I/O failures on `out` itself
/// are returned as `Err`.
pub fn run(cfg: &RunConfig, command: Command, out: &Path) -> Result<RunManifest> {
    fs::create_dir_all(out)?;
    let config_json = cfg.to_json()?;
    let mut manifest = RunManifest {
        scenario: cfg.scenario.clone(),
        command,
        config_sha256: sha256_hex(config_json.as_bytes()),
        versions: BTreeMap::from([("minsup".to_string(), env!("CARGO_PKG_VERSION").to_string())]),
        wall_times: BTreeMap::new(),
        files: Vec::new(),
        verdicts: Vec::new(),
        errors: Vec::new(),
        exit_code: 0,
    };
    manifest
        .files
        .push(write_atomic(out, "config.json", config_json.as_bytes())?);
    if let Err(e) = execute(cfg, command, out, &mut manifest) {
        error!("{e}");
        manifest.errors.push(e.to_string());
    }
    manifest.exit_code = if !manifest.errors.is_empty() || manifest.verdicts.iter().any(|(_, v)| *v == Verdict::Fail) {
        1
    } else if manifest.verdicts.iter().any(|(_, v)| *v == Verdict::Inconclusive) {
        2
    } else {
        0
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    write_atomic(out, "manifest.json", text.as_bytes())?;
    Ok(manifest)
}

fn execute(cfg: &RunConfig, command: Command, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let g = cfg.generator()?;
    let phi = cfg.terminal()?;
    let d = cfg.diffusion.build()?;
    let selected: Vec<(usize, &CheckSpec)> = cfg
        .checks
        .iter()
        .enumerate()
        .filter(|(_, c)| command.selects(c))
        .collect();
    if selected.is_empty()
        && !matches!(
            command,
            Command::Run | Command::Solve | Command::Ladder | Command::Conjugate
        )
    {
        return Err(Error::InvalidArgument(format!(
            "scenario '{}' configures no check for this subcommand",
            cfg.scenario
        )));
    }

    let wants_surface = matches!(command, Command::Solve)
        || selected
            .iter()
            .any(|(_, c)| c.needs_surface() || matches!(c, CheckSpec::Markov { .. }));
    let mut solution: Option<LadderSolution> = None;
    if wants_surface {
        let t = Instant::now();
        let sol = solve_ladder(&g, &phi, &d, &cfg.grid, &cfg.ladder)?;
        manifest.wall_times.insert("solve".into(), t.elapsed().as_secs_f64());
        info!("ladder stopped at n* = {} (converged: {})", sol.n_star, sol.converged);
        let mut csv = Vec::new();
        sol.surface.write_csv(&mut csv, SURFACE_ROWS)?;
        manifest.files.push(write_atomic(out, "surface.csv", &csv)?);
        let sm = SolverManifest::new(&g, &sol, &cfg.ladder);
        manifest.files.push(write_atomic(
            out,
            "solver.json",
            serde_json::to_string_pretty(&sm)?.as_bytes(),
        )?);
        solution = Some(sol);
    }

    match command {
        Command::Ladder => {
            let t = Instant::now();
            let levels = (1..=cfg.ladder.n_max)
                .map(|n| build_gn(&g, n))
                .collect::<Result<Vec<_>>>()?;
            let probe = ProbeGrid3 {
                x: Axis::new(cfg.grid.x_lo, cfg.grid.x_hi, 25)?,
                y: Axis::new(-4.0, 4.0, 17)?,
                z: Axis::new(-8.0, 8.0, 65)?,
            };
            let mono = verify_monotone_ladder(&levels, &probe, 1e-12)?;
            let lm = LadderManifest::new(&levels, &mono);
            manifest.files.push(write_atomic(
                out,
                "ladder.json",
                serde_json::to_string_pretty(&lm)?.as_bytes(),
            )?);
            let mut r = CheckReport::new(
                "ladder",
                serde_json::json!({ "generator": g.name(), "n_max": cfg.ladder.n_max }),
            );
            r.gap("max_step_violation", mono.max_step_violation, mono.tolerance)
                .gap("max_excess", mono.max_excess, mono.tolerance);
            let r = r.conclude(true).with_scenario(&cfg.scenario);
            manifest.wall_times.insert("ladder".into(), t.elapsed().as_secs_f64());
            emit_reports(out, manifest, vec![r])?;
        }
        Command::Conjugate => {
            let rec = RecConfig::default();
            let x0 = cfg.mc.x0;
            let slice = GridFunction::from_fn_2d(rec.y, rec.z, |y, z| g.eval(x0, y, z))?;
            let conj = legendre_conjugate(&slice, &dual_box(2, 4.0, 33)?)?;
            let mut csv = Vec::new();
            conj.write_csv(&mut csv)?;
            manifest.files.push(write_atomic(out, "conjugate.csv", &csv)?);
        }
        _ => {}
    }

    let jobs: Vec<(String, Result<CheckReport>, f64)> = selected
        .par_iter()
        .map(|&(i, c)| {
            let t = Instant::now();
            let r = run_check(cfg, c, i, solution.as_ref().map(|s| &s.surface));
            (format!("{:02}-{}", i, c.name()), r, t.elapsed().as_secs_f64())
        })
        .collect();
    let mut reports = Vec::new();
    for (key, r, secs) in jobs {
        manifest.wall_times.insert(key.clone(), secs);
        match r {
            Ok(r) => reports.push(r.with_scenario(&cfg.scenario)),
            Err(e) => {
                error!("check {key}: {e}");
                manifest.errors.push(format!("check {key}: {e}"));
            }
        }
    }
    if !reports.is_empty() {
        emit_reports(out, manifest, reports)?;
    }
    Ok(())
}

fn emit_reports(out: &Path, manifest: &mut RunManifest, reports: Vec<CheckReport>) -> Result<()> {
    for (k, r) in reports.iter().enumerate() {
        let name = format!("report-{:02}-{}.json", k, r.name);
        manifest
            .files
            .push(write_atomic(out, &name, serde_json::to_string_pretty(r)?.as_bytes())?);
        manifest.verdicts.push((r.name.clone(), r.verdict));
    }
    let mut csv = Vec::new();
    write_summary(&reports, &mut csv)?;
    manifest.files.push(write_atomic(out, "summary.csv", &csv)?);
    Ok(())
}

fn run_check(cfg: &RunConfig, c: &CheckSpec, index: usize, surface: Option<&ValueSurface>) -> Result<CheckReport> {
    let g = cfg.generator()?;
    let phi = cfg.terminal()?;
    let d = cfg.diffusion.build()?;
    let seed = check_seed(cfg.seed, c.name(), index);
    let need = || surface.ok_or_else(|| Error::InvalidArgument("check needs the ladder surface".into()));
    match c {
        CheckSpec::Stability {
            x,
            sequence,
            tol,
            claim,
            rec_known,
            tail_from,
        } => {
            let sc = StabilityConfig {
                grid: cfg.grid,
                ladder: cfg.ladder,
                tol: *tol,
                claim: *claim,
                rec_known: *rec_known,
                tail_from: *tail_from,
                ..StabilityConfig::default()
            };
            check_stability(&g, &phi, &d, *x, &sequence.points(*x), &sc)
        }
        CheckSpec::Locality {
            t,
            event,
            second,
            level,
        } => {
            let lc = LocalityConfig {
                x0: cfg.mc.x0,
                n_paths: cfg.mc.n_paths,
                steps: cfg.mc.steps,
                seed,
                level: *level,
                regression: cfg.mc.regression,
                se_factor: 3.0,
            };
            check_locality(&g, &phi, &d, &second.build()?, *t, *event, &lc)
        }
        CheckSpec::Markov { t, equality, buckets } => {
            let mc = MarkovConfig {
                grid: cfg.grid,
                ladder: cfg.ladder,
                x0: cfg.mc.x0,
                n_paths: cfg.mc.n_paths,
                steps: cfg.mc.steps,
                seed,
                regression: cfg.mc.regression,
                buckets: *buckets,
                equality: *equality,
                se_factor: 3.0,
            };
            check_markov_identity(&g, &phi, &d, *t, &mc)
        }
        CheckSpec::Shift { t, x, level } => check_shift_identity(
            &g,
            &phi,
            &d,
            *t,
            *x,
            &ShiftConfig {
                grid: cfg.grid,
                level: *level,
            },
        ),
        CheckSpec::Viscosity { tol, kink_threshold } => viscosity_residual(
            need()?,
            &g,
            &d,
            &ViscosityConfig {
                tol: *tol,
                kink_threshold: *kink_threshold,
            },
        ),
        CheckSpec::Lsc { t } => check_lsc(need()?, *t),
        CheckSpec::Limits { family, axis } => check_limit_family(family, *axis),
    }
}

/// Output directory: explicit flag (or `MINSUP_OUT`), then the config, then `minsup-out`.
pub fn resolve_out(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("minsup-out"))
}
