//! Flat `key = value` run configuration with dotted namespaces.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::hamiltonian::DensityRegistry;
use crate::hum::{make_cutoff, HumOptions};
use crate::nash_moser::{NMParams, NonlinearOptions};
use crate::solver::SolverOptions;
use crate::spectral::{Grid, TimeGrid};

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub n: usize,
    pub n_t: usize,
    pub horizon: f64,
    pub density: String,
    pub kappa0: f64,
    pub arc: (f64, f64),
    pub plateau: f64,
    /// Spectral `L^2` size of the background state for the linear commands.
    pub background_amplitude: f64,
    pub background_modes: i64,
    /// `H^4` size of the nonlinear data.
    pub data_norm: f64,
    pub data_modes: i64,
    pub zero_data: bool,
    pub eta: f64,
    pub observe_mu: f64,
    pub observe_trials: usize,
    pub observe_modes: usize,
    pub observe_operator_trials: usize,
    pub solver: SolverOptions,
    pub hum: HumOptions,
    pub nm: NMParams,
    pub integrator_substeps: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// Every recognised key with its default, in output order.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("grid.n", "64"),
    ("time.n_t", "257"),
    ("time.horizon", "1"),
    ("density.name", "cubic-a"),
    ("density.kappa0", "0.05"),
    ("cutoff.a", "0"),
    ("cutoff.b", "3.141592653589793"),
    ("cutoff.plateau", "0.5"),
    ("background.amplitude", "0.01"),
    ("background.modes", "2"),
    ("data.norm", "0.001"),
    ("data.modes", "3"),
    ("data.zero", "false"),
    ("reduce.eta", "0.1"),
    ("observe.mu", "1"),
    ("observe.trials", "200"),
    ("observe.modes", "8"),
    ("observe.operator_trials", "20"),
    ("solver.refine", "2"),
    ("solver.picard_refine", "8"),
    ("solver.picard_sweeps", "50"),
    ("solver.picard_tol", "1e-12"),
    ("solver.residual_tol", "1e-6"),
    ("solver.cross_check_tol", "1e-5"),
    ("hum.cg_tol", "1e-10"),
    ("hum.max_iters", "500"),
    ("hum.endpoint_tol", "1e-6"),
    ("nm.a0", "1"),
    ("nm.mu_loss", "2"),
    ("nm.a1", "2"),
    ("nm.alpha", "5"),
    ("nm.beta_reg", "5"),
    ("nm.a2", "9"),
    ("nm.delta", "10"),
    ("nm.max_iter", "8"),
    ("nm.tol", "1e-8"),
    ("nm.j0", "3"),
    ("nm.block_constant", "2"),
    ("nm.resolution_tail", "1e-5"),
    ("nm.substeps", "4"),
    ("seed", "1"),
    ("out", "out"),
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got `{line}`", no + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Applies one `key=value` override.
pub fn apply_override(map: &mut BTreeMap<String, String>, kv: &str) -> Result<()> {
    let (k, v) = kv
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{kv}`")))?;
    map.insert(k.trim().to_string(), v.trim().to_string());
    Ok(())
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
}

impl<'a> Reader<'a> {
    fn raw(&self, key: &str) -> &str {
        self.map
            .get(key)
            .map(|s| s.as_str())
            .or_else(|| DEFAULTS.iter().find(|(k, _)| *k == key).map(|(_, v)| *v))
            .expect("every key has a default")
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let v = self.raw(key);
        let x: f64 = v
            .parse()
            .map_err(|_| Error::Config(format!("{key}: expected a number, got `{v}`")))?;
        if !x.is_finite() {
            return Err(Error::Config(format!("{key}: must be finite, got `{v}`")));
        }
        Ok(x)
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let x = self.f64(key)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(Error::Config(format!("{key}: must be positive, got {x}")))
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let v = self.raw(key);
        v.parse()
            .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got `{v}`")))
    }

    fn u64(&self, key: &str) -> Result<u64> {
        let v = self.raw(key);
        v.parse()
            .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got `{v}`")))
    }

    fn bool(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(Error::Config(format!("{key}: expected true or false, got `{v}`"))),
        }
    }
}

impl RunConfig {
    pub fn defaults() -> RunConfig {
        RunConfig::from_map(&BTreeMap::new()).expect("defaults are valid")
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<RunConfig> {
        if let Some(k) = map.keys().find(|k| !DEFAULTS.iter().any(|(d, _)| d == k)) {
            return Err(Error::Config(format!("{k}: unknown key")));
        }
        let r = Reader { map };
        let with_key = |key: &str, e: Error| match e {
            Error::Config(m) if m.starts_with(key) => Error::Config(m),
            Error::Config(m) => Error::Config(format!("{key}: {m}")),
            Error::Precondition(m) => Error::Config(format!("{key}: {m}")),
            other => Error::Config(format!("{key}: {other}")),
        };
        let n = r.usize("grid.n")?;
        Grid::new(n).map_err(|e| with_key("grid.n", e))?;
        let n_t = r.usize("time.n_t")?;
        let horizon = r.positive("time.horizon")?;
        TimeGrid::new(horizon, n_t).map_err(|e| with_key("time.n_t", e))?;
        let kappa0 = r.f64("density.kappa0")?;
        let density = r.raw("density.name").to_string();
        DensityRegistry::with_builtins(kappa0).get(&density)?;
        let arc = (r.f64("cutoff.a")?, r.f64("cutoff.b")?);
        let plateau = r.f64("cutoff.plateau")?;
        make_cutoff(&Grid::new(n)?, arc.0, arc.1, plateau).map_err(|e| with_key("cutoff.a", e))?;
        let observe_mu = r.f64("observe.mu")?;
        if observe_mu < 0.5 {
            return Err(Error::Precondition(format!(
                "observe.mu: the Ingham bound needs mu >= 1/2, got {observe_mu}"
            )));
        }
        let solver = SolverOptions {
            refine: r.usize("solver.refine")?.max(1),
            picard_refine: r.usize("solver.picard_refine")?.max(1),
            picard_sweeps: r.usize("solver.picard_sweeps")?,
            picard_tol: r.positive("solver.picard_tol")?,
            remainder_gate: SolverOptions::default().remainder_gate,
            residual_tol: r.positive("solver.residual_tol")?,
            cross_check_tol: r.positive("solver.cross_check_tol")?,
        };
        let hum = HumOptions {
            max_iters: r.usize("hum.max_iters")?,
            rel_tol: r.positive("hum.cg_tol")?,
            endpoint_tol: r.positive("hum.endpoint_tol")?,
            solver,
        };
        let nm = NMParams {
            a0: r.f64("nm.a0")?,
            mu_loss: r.f64("nm.mu_loss")?,
            a1: r.f64("nm.a1")?,
            alpha: r.f64("nm.alpha")?,
            beta_reg: r.f64("nm.beta_reg")?,
            a2: r.f64("nm.a2")?,
            delta: r.positive("nm.delta")?,
            max_iter: r.usize("nm.max_iter")?,
            tol: r.positive("nm.tol")?,
            j0: r.usize("nm.j0")? as u32,
            block_constant: r.positive("nm.block_constant")?,
            resolution_tail: r.positive("nm.resolution_tail")?,
        };
        nm.validate()?;
        let data_modes = r.usize("data.modes")? as i64;
        for key in ["data.modes", "background.modes"] {
            let m = r.usize(key)?;
            if m >= n / 3 {
                return Err(Error::Config(format!("{key}: must stay below n/3, got {m}")));
            }
        }
        Ok(RunConfig {
            n,
            n_t,
            horizon,
            density,
            kappa0,
            arc,
            plateau,
            background_amplitude: r.f64("background.amplitude")?.abs(),
            background_modes: r.usize("background.modes")? as i64,
            data_norm: r.f64("data.norm")?.abs(),
            data_modes,
            zero_data: r.bool("data.zero")?,
            eta: r.positive("reduce.eta")?,
            observe_mu,
            observe_trials: r.usize("observe.trials")?,
            observe_modes: r.usize("observe.modes")?.max(1),
            observe_operator_trials: r.usize("observe.operator_trials")?.max(1),
            solver,
            hum,
            nm,
            integrator_substeps: r.usize("nm.substeps")?.max(1),
            seed: r.u64("seed")?,
            out: PathBuf::from(r.raw("out")),
        })
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.n).expect("validated")
    }

    pub fn times(&self) -> TimeGrid {
        TimeGrid::new(self.horizon, self.n_t).expect("validated")
    }

    pub fn nonlinear_options(&self) -> NonlinearOptions {
        NonlinearOptions {
            params: self.nm,
            hum: self.hum,
            integrator_substeps: self.integrator_substeps,
            ..NonlinearOptions::default()
        }
    }

    /// Resolved `key = value` pairs, in the order of [`DEFAULTS`].
    pub fn resolved(map: &BTreeMap<String, String>) -> Vec<(String, String)> {
        DEFAULTS
            .iter()
            .map(|(k, d)| (k.to_string(), map.get(*k).cloned().unwrap_or_else(|| d.to_string())))
            .collect()
    }
}
