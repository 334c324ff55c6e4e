//! CSV, manifest and JSON report writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::spectral::Traj;

/// Fixed-format float used in every CSV cell.
pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

/// In-memory CSV table with a header row.
pub struct Csv {
    header: Vec<String>,
    body: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv {
            header: header.iter().map(|s| s.to_string()).collect(),
            body: String::new(),
        }
    }

    pub fn row(&mut self, cells: &[f64]) {
        debug_assert_eq!(cells.len(), self.header.len());
        let line: Vec<String> = cells.iter().map(|&c| num(c)).collect();
        self.body.push_str(&line.join(","));
        self.body.push('\n');
    }

    /// Row whose first cell is a label.
    pub fn labelled(&mut self, label: &str, cells: &[f64]) {
        debug_assert_eq!(cells.len() + 1, self.header.len());
        self.body.push_str(label);
        for &c in cells {
            self.body.push(',');
            self.body.push_str(&num(c));
        }
        self.body.push('\n');
    }

    pub fn render(&self) -> String {
        format!("{}\n{}", self.header.join(","), self.body)
    }
}

/// Long-format heatmap `t,x,re,im,abs` of a trajectory on the grid nodes.
pub fn heatmap(u: &Traj) -> Csv {
    let mut csv = Csv::new(&["t", "x", "re", "im", "abs"]);
    let grid = u.grid().clone();
    for (i, f) in u.samples.iter().enumerate() {
        let t = u.times.t(i);
        for (j, v) in f.values().iter().enumerate() {
            csv.row(&[t, grid.node(j), v.re, v.im, v.norm()]);
        }
    }
    csv
}

/// Collects everything one run writes.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
    residuals: Vec<(String, f64)>,
    timings: Vec<(String, f64)>,
    extra: Map<String, Value>,
    clock: Instant,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Artifacts> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            residuals: Vec::new(),
            timings: Vec::new(),
            extra: Map::new(),
            clock: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn residuals(&self) -> &[(String, f64)] {
        &self.residuals
    }

    pub fn write_csv(&mut self, name: &str, csv: &Csv) -> Result<()> {
        self.write_text(name, &csv.render())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn residual(&mut self, name: &str, value: f64) {
        self.residuals.push((name.to_string(), value));
    }

    /// Records the seconds since the previous call under `stage`.
    pub fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings
            .push((stage.to_string(), now.duration_since(self.clock).as_secs_f64()));
        self.clock = now;
    }

    pub fn note(&mut self, key: &str, value: Value) {
        self.extra.insert(key.to_string(), value);
    }

    /// Writes `manifest.txt` (deterministic) and `report.json` (with timings).
    pub fn finish(&mut self, command: &str, config: &[(String, String)], status: &str) -> Result<()> {
        let mut m = String::new();
        let _ = writeln!(m, "command = {command}");
        let _ = writeln!(m, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(m, "status = {status}");
        m.push_str("\n[config]\n");
        for (k, v) in config {
            let _ = writeln!(m, "{k} = {v}");
        }
        m.push_str("\n[outputs]\n");
        for f in &self.files {
            let _ = writeln!(m, "{f}");
        }
        m.push_str("\n[residuals]\n");
        for (k, v) in &self.residuals {
            let _ = writeln!(m, "{k} = {}", num(*v));
        }
        let path = self.dir.join("manifest.txt");
        fs::write(&path, m).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;

        let cfg: Map<String, Value> = config
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let residuals: Map<String, Value> = self
            .residuals
            .iter()
            .map(|(k, v)| (k.clone(), json_num(*v)))
            .collect();
        let timings: Map<String, Value> = self
            .timings
            .iter()
            .map(|(k, v)| (k.clone(), json_num(*v)))
            .collect();
        let report = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "status": status,
            "config": cfg,
            "outputs": self.files,
            "residuals": residuals,
            "timings_seconds": timings,
            "details": Value::Object(self.extra.clone()),
        });
        let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
        let path = self.dir.join("report.json");
        fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

/// JSON has no infinities; they are written as strings.
pub fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(format!("{x}"))
    }
}
