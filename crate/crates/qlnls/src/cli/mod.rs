//! Batch front end: configuration, subcommands and artifact emission.

mod artifacts;
mod check;
mod commands;
pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use artifacts::{Artifacts, Csv};
pub use check::{run_checks, CheckLine};
pub use config::{RunConfig, DEFAULTS};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Reduce,
    Observe,
    ControlLin,
    Control,
    Cauchy,
    Check,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Reduce => "reduce",
            Command::Observe => "observe",
            Command::ControlLin => "control-lin",
            Command::Control => "control",
            Command::Cauchy => "cauchy",
            Command::Check => "check",
        }
    }

    pub fn all() -> [Command; 7] {
        [
            Command::Simulate,
            Command::Reduce,
            Command::Observe,
            Command::ControlLin,
            Command::Control,
            Command::Cauchy,
            Command::Check,
        ]
    }
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Command> {
        Command::all()
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand `{s}`")))
    }
}

/// Raw inputs of one invocation before validation.
#[derive(Clone, Debug, Default)]
pub struct Invocation {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub overrides: Vec<String>,
}

impl Invocation {
    /// Merges file, overrides and flags; flags win over everything.
    pub fn key_values(&self) -> Result<BTreeMap<String, String>> {
        let mut map = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("--config {}: {e}", p.display())))?;
                config::parse_text(&text)?
            }
            None => BTreeMap::new(),
        };
        for kv in &self.overrides {
            config::apply_override(&mut map, kv)?;
        }
        if let Some(o) = &self.out {
            map.insert("out".into(), o.display().to_string());
        }
        if let Some(s) = self.seed {
            map.insert("seed".into(), s.to_string());
        }
        Ok(map)
    }
}

/// Outcome of a successful run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub command: Command,
    pub out: PathBuf,
    pub files: Vec<String>,
    pub residuals: Vec<(String, f64)>,
}

/// Parses, runs `command`, and writes its artifacts, `manifest.txt` and `report.json`.
pub fn run(command: Command, inv: &Invocation) -> Result<RunSummary> {
    let map = inv.key_values()?;
    let cfg = RunConfig::from_map(&map)?;
    let resolved = RunConfig::resolved(&map);
    run_config(command, &cfg, &resolved)
}

pub fn run_config(command: Command, cfg: &RunConfig, resolved: &[(String, String)]) -> Result<RunSummary> {
    let mut art = Artifacts::new(&cfg.out)?;
    let outcome = match command {
        Command::Simulate => commands::simulate(cfg, &mut art),
        Command::Reduce => commands::reduce(cfg, &mut art),
        Command::Observe => commands::observe(cfg, &mut art),
        Command::ControlLin => commands::control_lin(cfg, &mut art),
        Command::Control => commands::control(cfg, &mut art),
        Command::Cauchy => commands::cauchy(cfg, &mut art),
        Command::Check => check::check_command(cfg, &mut art),
    };
    let status = match &outcome {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error (exit {}): {e}", e.exit_code()),
    };
    art.finish(command.name(), resolved, &status)?;
    outcome.map_err(|e| context(command, e))?;
    Ok(RunSummary {
        command,
        out: cfg.out.clone(),
        files: art.files().to_vec(),
        residuals: art.residuals().to_vec(),
    })
}

fn context(command: Command, e: Error) -> Error {
    let tag = command.name();
    match e {
        Error::Config(m) => Error::Config(m),
        Error::Precondition(m) => Error::Precondition(format!("{tag}: {m}")),
        Error::Smallness(m) => Error::Smallness(format!("{tag}: {m}")),
        Error::Contraction(m) => Error::Contraction(format!("{tag}: {m}")),
        Error::Accuracy(m) => Error::Accuracy(format!("{tag}: {m}")),
        Error::Consistency(m) => Error::Consistency(format!("{tag}: {m}")),
        Error::Observability(m) => Error::Observability(format!("{tag}: {m}")),
        Error::Divergence(m) => Error::Divergence(format!("{tag}: {m}")),
        Error::Control(m) => Error::Control(format!("{tag}: {m}")),
        other => other,
    }
}

/// Whether `dir` is inside an artifact tree written by [`run`].
pub fn has_manifest(dir: &Path) -> bool {
    dir.join("manifest.txt").is_file()
}
