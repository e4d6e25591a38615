//! Configuration, scenario registry and the `minsup` command line.

mod config;
mod run;
mod scenarios;

use std::path::PathBuf;

use clap::Parser;
use serde_json::Value;

pub use config::{parse_config, CheckSpec, DiffusionConfig, McConfig, RunConfig, SequenceSpec};
pub use run::{check_seed, resolve_out, run, Command, FileEntry, RunManifest};
pub use scenarios::{scenario, SCENARIO_NAMES};

use crate::error::{ConfigError, Result};

#[derive(Debug, Parser)]
#[command(name = "minsup", version, about = "Minimal supersolutions of decoupled FBSDEs")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON config; keys override the named scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Registry scenario, when no config file is given.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "MINSUP_OUT")]
    pub out: Option<PathBuf>,
}

impl Cli {
    /// Config text after applying `--scenario` and `--seed`.
    pub fn config_text(&self) -> Result<String> {
        let mut v = match &self.config {
            Some(p) => {
                serde_json::from_str(&std::fs::read_to_string(p)?).map_err(|e| ConfigError::Malformed(e.to_string()))?
            }
            None => Value::Object(Default::default()),
        };
        let Value::Object(m) = &mut v else {
            return Err(ConfigError::Malformed("top level must be an object".into()).into());
        };
        if let Some(s) = &self.scenario {
            m.insert("scenario".into(), Value::String(s.clone()));
        }
        if let Some(s) = self.seed {
            m.insert("seed".into(), Value::from(s));
        }
        Ok(v.to_string())
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = cli.config_text().and_then(|t| parse_config(&t)).and_then(|cfg| {
        let out = resolve_out(cli.out.clone(), &cfg);
        run(&cfg, cli.command, &out).map(|m| (m, out))
    });
    match result {
        Ok((m, out)) => {
            for (name, v) in &m.verdicts {
                println!("{name}: {}", v.as_str());
            }
            for e in &m.errors {
                eprintln!("error: {e}");
            }
            println!("artifacts in {}", out.display());
            m.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
